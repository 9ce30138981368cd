#include "docnmt/morphology.hpp"

namespace docnmt {

// surface<TAB>lemma<TAB>tags
const std::string& toy_lexicon_text() {
  static const std::string text = R"LEX(ya	ya	NPRO,1per,sing,nomn
menya	ya	NPRO,1per,sing,accs
mne	ya	NPRO,1per,sing,datv
my	ya	NPRO,1per,plur,nomn
ty	ty	NPRO,2per,sing,nomn
vy	ty	NPRO,2per,plur,nomn
on	on	NPRO,3per,sing,masc,nomn
ona	on	NPRO,3per,sing,femn,nomn
oni	on	NPRO,3per,plur,nomn
tvoy	tvoy	POSS,2per,sing,masc
vash	tvoy	POSS,2per,plur,masc
vizhu	videt	VERB,1per,sing,indc
vidish	videt	VERB,2per,sing,indc
vidit	videt	VERB,3per,sing,indc
vidim	videt	VERB,1per,plur,indc
vidite	videt	VERB,2per,plur,indc
vidyat	videt	VERB,3per,plur,indc
znayu	znat	VERB,1per,sing,indc
znaesh	znat	VERB,2per,sing,indc
znaet	znat	VERB,3per,sing,indc
znaem	znat	VERB,1per,plur,indc
znaete	znat	VERB,2per,plur,indc
znayut	znat	VERB,3per,plur,indc
lyublyu	lyubit	VERB,1per,sing,indc
lyubish	lyubit	VERB,2per,sing,indc
lyubit	lyubit	VERB,3per,sing,indc
lyubim	lyubit	VERB,1per,plur,indc
lyubite	lyubit	VERB,2per,plur,indc
lyubyat	lyubit	VERB,3per,plur,indc
khochu	khotet	VERB,1per,sing,indc
khochesh	khotet	VERB,2per,sing,indc
khochet	khotet	VERB,3per,sing,indc
khotim	khotet	VERB,1per,plur,indc
khotite	khotet	VERB,2per,plur,indc
khotyat	khotet	VERB,3per,plur,indc
delayu	delat	VERB,1per,sing,indc
delaesh	delat	VERB,2per,sing,indc
delaet	delat	VERB,3per,sing,indc
delaem	delat	VERB,1per,plur,indc
delaete	delat	VERB,2per,plur,indc
delayut	delat	VERB,3per,plur,indc
sdelayu	sdelat	VERB,1per,sing,indc
sdelaesh	sdelat	VERB,2per,sing,indc
sdelaet	sdelat	VERB,3per,sing,indc
sdelaem	sdelat	VERB,1per,plur,indc
sdelaete	sdelat	VERB,2per,plur,indc
sdelayut	sdelat	VERB,3per,plur,indc
govoryu	govorit	VERB,1per,sing,indc
govorish	govorit	VERB,2per,sing,indc
govorit	govorit	VERB,3per,sing,indc
govorim	govorit	VERB,1per,plur,indc
govorite	govorit	VERB,2per,plur,indc
govoryat	govorit	VERB,3per,plur,indc
chitayu	chitat	VERB,1per,sing,indc
chitaesh	chitat	VERB,2per,sing,indc
chitaet	chitat	VERB,3per,sing,indc
chitaem	chitat	VERB,1per,plur,indc
chitaete	chitat	VERB,2per,plur,indc
chitayut	chitat	VERB,3per,plur,indc
rabotayu	rabotat	VERB,1per,sing,indc
rabotaesh	rabotat	VERB,2per,sing,indc
rabotaet	rabotat	VERB,3per,sing,indc
rabotaem	rabotat	VERB,1per,plur,indc
rabotaete	rabotat	VERB,2per,plur,indc
rabotayut	rabotat	VERB,3per,plur,indc
igrayu	igrat	VERB,1per,sing,indc
igraesh	igrat	VERB,2per,sing,indc
igraet	igrat	VERB,3per,sing,indc
igraem	igrat	VERB,1per,plur,indc
igraete	igrat	VERB,2per,plur,indc
igrayut	igrat	VERB,3per,plur,indc
pomnyu	pomnit	VERB,1per,sing,indc
pomnish	pomnit	VERB,2per,sing,indc
pomnit	pomnit	VERB,3per,sing,indc
pomnim	pomnit	VERB,1per,plur,indc
pomnite	pomnit	VERB,2per,plur,indc
pomnyat	pomnit	VERB,3per,plur,indc
ponimayu	ponimat	VERB,1per,sing,indc
ponimaesh	ponimat	VERB,2per,sing,indc
ponimaet	ponimat	VERB,3per,sing,indc
ponimaem	ponimat	VERB,1per,plur,indc
ponimaete	ponimat	VERB,2per,plur,indc
ponimayut	ponimat	VERB,3per,plur,indc
smotri	smotret	VERB,2per,sing,impr
smotrite	smotret	VERB,2per,plur,impr
slushay	slushat	VERB,2per,sing,impr
slushayte	slushat	VERB,2per,plur,impr
skazhi	skazat	VERB,2per,sing,impr
skazhite	skazat	VERB,2per,plur,impr
idi	idti	VERB,2per,sing,impr
idite	idti	VERB,2per,plur,impr
dom	dom	NOUN,inan,masc
stol	stol	NOUN,inan,masc
gorod	gorod	NOUN,inan,masc
les	les	NOUN,inan,masc
sad	sad	NOUN,inan,masc
khleb	khleb	NOUN,inan,masc
park	park	NOUN,inan,masc
most	most	NOUN,inan,masc
poezd	poezd	NOUN,inan,masc
mir	mir	NOUN,inan,masc
marta	marta	NOUN,Name,femn,nomn
martu	marta	NOUN,Name,femn,accs
marfa	marfa	NOUN,Name,femn,nomn
marfu	marfa	NOUN,Name,femn,accs
katya	katya	NOUN,Name,femn,nomn
katyu	katya	NOUN,Name,femn,accs
katerina	katerina	NOUN,Name,femn,nomn
katerinu	katerina	NOUN,Name,femn,accs
elena	elena	NOUN,Name,femn,nomn
elenu	elena	NOUN,Name,femn,accs
olena	olena	NOUN,Name,femn,nomn
olenu	olena	NOUN,Name,femn,accs
anna	anna	NOUN,Name,femn,nomn
annu	anna	NOUN,Name,femn,accs
anya	anya	NOUN,Name,femn,nomn
anyu	anya	NOUN,Name,femn,accs
daniil	daniil	NOUN,Name,masc,nomn
daniila	daniil	NOUN,Name,masc,accs
danila	danila	NOUN,Name,masc,nomn
danilu	danila	NOUN,Name,masc,accs
ser	ser	NOUN,anim,masc,voct
druzhe	drug	NOUN,anim,masc,voct
na	na	PREP
v	v	PREP
tozhe	tozhe	ADVB
segodnya	segodnya	ADVB
seychas	seychas	ADVB
snova	snova	ADVB
zdes	zdes	ADVB
da	da	PRCL
)LEX";
  return text;
}

}  // namespace docnmt
