#include "docnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace docnmt {

void ParameterSet::add(const std::string& name, Tensor tensor) {
  if (!params_.emplace(name, std::move(tensor)).second) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void ParameterSet::set_requires_grad(bool flag) {
  for (auto& [name, t] : params_) t.node()->requires_grad = flag;
}

ParameterSet ParameterSet::clone() const {
  ParameterSet copy;
  for (const auto& [name, t] : params_) {
    copy.add(name, Tensor::from_data(t.shape(), std::vector<double>(t.data().begin(), t.data().end()),
                                     t.requires_grad()));
  }
  return copy;
}

void assign_parameters(ParameterSet& target, const ParameterSet& source) {
  if (target.size() != source.size()) throw CheckpointError("parameter count mismatch");
  for (auto& [name, t] : target) {
    if (!source.contains(name)) throw CheckpointError("missing parameter: " + name);
    const Tensor& s = source.at(name);
    if (s.shape() != t.shape()) {
      throw CheckpointError("shape mismatch for " + name + ": " + to_string(s.shape()) + " vs " +
                            to_string(t.shape()));
    }
    std::copy(s.data().begin(), s.data().end(), t.mutable_data().begin());
  }
}

namespace {

constexpr char kMagic[8] = {'D', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw CheckpointError("truncated checkpoint");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get_le<std::uint32_t>(in);
  if (len > (1u << 20)) throw CheckpointError("implausible string length in checkpoint");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put_le<std::uint64_t>(out, checkpoint.params.size());
  for (const auto& [name, t] : checkpoint.params) {
    put_string(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CheckpointError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file: " + path);
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto n_meta = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(in);
    ck.metadata[k] = get_string(in);
  }
  const auto n_params = get_le<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = get_string(in);
    const auto rank = get_le<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw CheckpointError("bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
    std::vector<double> values(numel(shape));
    for (double& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    ck.params.add(name, Tensor::from_data(std::move(shape), std::move(values)));
  }
  return ck;
}

}  // namespace docnmt
