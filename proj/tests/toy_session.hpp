#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "docnmt/bpe.hpp"
#include "docnmt/inference.hpp"

namespace docnmt::testing {

// Next-token log-probabilities are a fixed random function of the prefix.
class TableSession : public DecoderSession {
 public:
  TableSession(std::uint64_t seed, std::size_t vocab, std::size_t rows)
      : seed_(seed), vocab_(vocab), prefixes_(rows), started_(rows, false) {}

  std::vector<double> log_probs(const TokenSeq& prefix) const {
    std::uint64_t h = seed_;
    for (int t : prefix) h = h * 1000003ULL + static_cast<std::uint64_t>(t) + 17;
    std::mt19937_64 rng(h);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<double> logits(vocab_);
    double mx = -std::numeric_limits<double>::infinity();
    for (double& x : logits) {
      x = n(rng);
      mx = std::max(mx, x);
    }
    double z = 0.0;
    for (double x : logits) z += std::exp(x - mx);
    for (double& x : logits) x = x - mx - std::log(z);
    return logits;
  }

  Tensor step(const std::vector<int>& tokens) override {
    if (tokens.size() != prefixes_.size()) throw std::logic_error("one token per row expected");
    std::vector<double> out;
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      if (started_[r]) prefixes_[r].push_back(tokens[r]);
      else if (tokens[r] != kBosId) throw std::logic_error("first token must be BOS");
      started_[r] = true;
      const auto lp = log_probs(prefixes_[r]);
      out.insert(out.end(), lp.begin(), lp.end());
    }
    return Tensor::from_data({tokens.size(), vocab_}, std::move(out));
  }

  void reorder(const std::vector<std::size_t>& rows) override {
    std::vector<TokenSeq> p;
    std::vector<bool> s;
    for (std::size_t r : rows) {
      p.push_back(prefixes_[r]);
      s.push_back(started_[r]);
    }
    prefixes_ = std::move(p);
    started_ = std::move(s);
  }

  std::size_t rows() const override { return prefixes_.size(); }

 private:
  std::uint64_t seed_;
  std::size_t vocab_;
  std::vector<TokenSeq> prefixes_;
  std::vector<bool> started_;
};

// Best sequence over every finished sequence of length <= max_len and every
// unfinished one of exactly max_len; ties to the smaller sequence.
inline Hypothesis exhaustive(const TableSession& model, std::size_t vocab, std::size_t max_len) {
  Hypothesis best;
  best.score = -std::numeric_limits<double>::infinity();
  std::function<void(TokenSeq&, double)> walk = [&](TokenSeq& prefix, double score) {
    const auto lp = model.log_probs(prefix);
    for (std::size_t t = 0; t < vocab; ++t) {
      prefix.push_back(static_cast<int>(t));
      const double s = score + lp[t];
      const bool done = static_cast<int>(t) == kEosId;
      if (done || prefix.size() == max_len) {
        if (s > best.score || (s == best.score && prefix < best.tokens)) best = {prefix, s, done};
      } else {
        walk(prefix, s);
      }
      prefix.pop_back();
    }
  };
  TokenSeq p;
  walk(p, 0.0);
  return best;
}

inline Hypothesis greedy(const TableSession& model, std::size_t max_len) {
  Hypothesis h;
  while (h.tokens.size() < max_len) {
    const auto lp = model.log_probs(h.tokens);
    const auto it = std::max_element(lp.begin(), lp.end());
    h.tokens.push_back(static_cast<int>(it - lp.begin()));
    h.score += *it;
    if (h.tokens.back() == kEosId) {
      h.finished = true;
      break;
    }
  }
  return h;
}

}  // namespace docnmt::testing
