#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <urdusum/preprocess.hpp>
#include <urdusum/rng.hpp>
#include <urdusum/utf8.hpp>

using namespace urdusum;

namespace {

const std::filesystem::path kData = URDUSUM_DATA_DIR;

const NormalizationTable& shipped_table() {
  static const NormalizationTable t = NormalizationTable::load(kData / "normalization.tsv");
  return t;
}

const LemmaRules& shipped_lemmas() {
  static const LemmaRules r = LemmaRules::load(kData / "lemma_rules.tsv", &shipped_table());
  return r;
}

const Pipeline& shipped_pipeline() {
  static const Pipeline p =
      Pipeline::load(kData / "normalization.tsv", kData / "lemma_rules.tsv", kData / "stopwords.txt");
  return p;
}

// Letters, mapped forms, diacritics, combining hamza, spaces, delimiters and
// punctuation, so random strings hit every normalization path.
const std::u32string kAlphabet =
    U"کتابگھرلوںیہےاآبپ"
    U"كيىةه٠٥"
    U"ًَِّْٰـ"
    U"ٓٔایو"
    U"  \t\n "
    U"۔؟!?.-،,;:\"()";

std::string random_text(Rng& rng, std::size_t max_len = 40) {
  std::u32string s;
  const std::size_t n = rng.below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s.push_back(kAlphabet[rng.below(kAlphabet.size())]);
  return utf8::encode(s);
}

std::u32string sorted_codepoints(std::u32string s) {
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

TEST_CASE("normalize_text examples") {
  const auto& t = shipped_table();
  CHECK(normalize_text("کتاب", t) == "کتاب");
  CHECK(normalize_text("كتاب", t) == "کتاب");
  CHECK(normalize_text("کِتاب", t) == "کتاب");
  CHECK(normalize_text("  آج   بارش\t\nہوئی  ", t) == "آج بارش ہوئی");
  CHECK(normalize_text("", t).empty());
  SECTION("decomposed alef with madda composes") { CHECK(normalize_text("\u0627\u0653", t) == "\u0622"); }
}

TEST_CASE("normalize_text output avoids mapped and stripped codepoints and is idempotent") {
  const auto& t = shipped_table();
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const std::string raw = random_text(rng);
    const std::string once = normalize_text(raw, t);
    INFO("input: " << raw);
    CHECK(normalize_text(once, t) == once);
    CHECK(utf8::nfc(once) == once);
    for (char32_t cp : utf8::decode(once)) {
      CHECK_FALSE(t.strip_set.contains(cp));
      CHECK_FALSE(t.char_map.contains(cp));
    }
    CHECK(once.find("  ") == std::string::npos);
  }
}

TEST_CASE("normalization table parsing") {
  SECTION("shipped table covers the required entries") {
    const auto& t = shipped_table();
    CHECK(t.char_map.at(0x064A) == 0x06CC);
    CHECK(t.char_map.at(0x0643) == 0x06A9);
    CHECK(t.char_map.at(0x0629) == 0x06C3);
    for (char32_t cp = 0x064B; cp <= 0x0652; ++cp) CHECK(t.strip_set.contains(cp));
    CHECK(t.strip_set.contains(0x0670));
  }
  SECTION("accepts U+ prefixes and comments") {
    std::istringstream in("# c\n\nU+0643\tU+06A9\n0650\tSTRIP\n");
    const auto t = NormalizationTable::parse(in, "t.tsv");
    CHECK(t.char_map.size() == 1);
    CHECK(t.strip_set.size() == 1);
  }
  SECTION("rejects chains") {
    std::istringstream in("0041\t0042\n0042\t0043\n");
    CHECK_THROWS_AS(NormalizationTable::parse(in, "t.tsv"), ParseError);
  }
  SECTION("rejects mapping into the strip set") {
    std::istringstream in("0041\t0042\n0042\tSTRIP\n");
    CHECK_THROWS_AS(NormalizationTable::parse(in, "t.tsv"), ParseError);
  }
  SECTION("reports the line of a bad entry") {
    std::istringstream in("0041\t0042\nzz\t0043\n");
    try {
      NormalizationTable::parse(in, "t.tsv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.file() == "t.tsv");
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("sentence_tokenize examples") {
  CHECK(sentence_tokenize("").empty());
  CHECK(sentence_tokenize("آج بارش ہوئی۔ کل دھوپ تھی۔") == std::vector<std::string>{"آج بارش ہوئی", "کل دھوپ تھی"});
  CHECK(sentence_tokenize("سوال؟ جواب!") == std::vector<std::string>{"سوال", "جواب"});
  CHECK(sentence_tokenize("ایک\nدو") == std::vector<std::string>{"ایک", "دو"});
  CHECK(sentence_tokenize("۔۔ ۔").empty());
  SECTION("hyphen splits only when enabled") {
    CHECK(sentence_tokenize("ایک-دو") == std::vector<std::string>{"ایک-دو"});
    CHECK(sentence_tokenize("ایک-دو", true) == std::vector<std::string>{"ایک", "دو"});
  }
}

TEST_CASE("sentence_tokenize conserves non-delimiter characters") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::string text = normalize_text(random_text(rng), shipped_table());
    std::u32string expected;
    for (char32_t cp : utf8::decode(text))
      if (!is_sentence_delimiter(cp) && !utf8::is_space(cp)) expected.push_back(cp);
    std::u32string got;
    for (const auto& s : sentence_tokenize(text)) {
      CHECK_FALSE(s.empty());
      for (char32_t cp : utf8::decode(s))
        if (!utf8::is_space(cp)) got.push_back(cp);
    }
    INFO("text: " << text);
    CHECK(got == expected);
    CHECK(sorted_codepoints(got) == sorted_codepoints(expected));
  }
}

TEST_CASE("word_tokenize examples") {
  using V = std::vector<std::string>;
  CHECK(word_tokenize("آج بارش ہوئی") == V{"آج", "بارش", "ہوئی"});
  CHECK(word_tokenize("  آج  ") == V{"آج"});
  CHECK(word_tokenize("آج، کل") == V{"آج", "،", "کل"});
  CHECK(word_tokenize("(آج)") == V{"(", "آج", ")"});
  CHECK(word_tokenize("").empty());
}

TEST_CASE("word_tokenize loses only whitespace") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const std::string text = random_text(rng);
    std::u32string expected;
    for (char32_t cp : utf8::decode(text))
      if (!utf8::is_space(cp)) expected.push_back(cp);
    std::u32string got;
    for (const auto& tok : word_tokenize(text)) {
      const std::u32string cps = utf8::decode(tok);
      REQUIRE_FALSE(cps.empty());
      for (char32_t cp : cps) CHECK_FALSE(utf8::is_space(cp));
      if (cps.size() > 1)
        for (char32_t cp : cps) CHECK_FALSE(utf8::is_punct(cp));
      got += cps;
    }
    CHECK(got == expected);
  }
}

TEST_CASE("lemmatize") {
  const auto& rules = shipped_lemmas();
  SECTION("ghareelo reduces to ghar") { CHECK(lemmatize("گھریلو", rules) == "گھر"); }
  SECTION("no matching rule is the identity") { CHECK(lemmatize("گھر", rules) == "گھر"); }
  SECTION("exceptions win over suffix rules") {
    CHECK(lemmatize("دونوں", rules) == "دونوں");
    CHECK(lemmatize("لوگوں", rules) == "لوگ");
  }
  SECTION("the longest matching suffix is applied, once") {
    LemmaRules r;
    r.add_suffix_rule("ab", "X");
    r.add_suffix_rule("cab", "Y");
    r.add_suffix_rule("b", "Z");
    CHECK(r.suffix_rules().front().suffix == "cab");
    CHECK(lemmatize("dcab", r) == "dY");
    CHECK(lemmatize("dab", r) == "dX");
    CHECK(lemmatize("db", r) == "dZ");
  }
  SECTION("a rule that would empty the token is skipped") {
    LemmaRules r;
    r.add_suffix_rule("abc", "");
    r.add_suffix_rule("c", "");
    CHECK(lemmatize("abc", r) == "ab");
  }
  SECTION("empty suffix rules are rejected") {
    LemmaRules r;
    CHECK_THROWS_AS(r.add_suffix_rule("", "x"), InvalidArgument);
    std::istringstream in("SUF\t\tx\n");
    CHECK_THROWS_AS(LemmaRules::parse(in, "r.tsv"), ParseError);
  }
  SECTION("output is non-empty and bounded") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      for (const auto& tok : word_tokenize(normalize_text(random_text(rng), shipped_table()))) {
        const std::string lemma = lemmatize(tok, rules);
        CHECK_FALSE(lemma.empty());
        CHECK(lemma.size() <= tok.size() + rules.max_replacement_length());
      }
    }
  }
}

TEST_CASE("remove_stopwords") {
  using V = std::vector<std::string>;
  CHECK(remove_stopwords({"a", "b", "c"}, StopwordSet{}) == V{"a", "b", "c"});
  CHECK(remove_stopwords({"a", "b"}, StopwordSet({"a", "b"})).empty());
  CHECK(remove_stopwords({"a", "s", "b", "s"}, StopwordSet({"s"})) == V{"a", "b"});
  SECTION("shipped entries are already normalized") {
    for (const auto& w : shipped_pipeline().stopwords.words()) CHECK(normalize_text(w, shipped_table()) == w);
  }
}

TEST_CASE("rank_sentences") {
  SECTION("single sentence scores its mean token frequency") {
    const auto r = rank_sentences({Sentence{{"x", "y", "x"}, 0}});
    REQUIRE(r.size() == 1);
    CHECK(r[0].score == Catch::Approx(5.0 / 3.0));
  }
  SECTION("identical sentences keep their order") {
    const auto r = rank_sentences({Sentence{{"a"}, 0}, Sentence{{"a"}, 0}, Sentence{{"b"}, 0}});
    CHECK(r[0].tokens == std::vector<std::string>{"a"});
    CHECK(r[2].tokens == std::vector<std::string>{"b"});
  }
  SECTION("frequency order") {
    const auto r = rank_sentences({Sentence{{"y"}, 0}, Sentence{{"x", "x"}, 0}});
    CHECK(r[0].tokens == std::vector<std::string>{"x", "x"});
    CHECK(r[0].score == 2.0);
    CHECK(r[1].score == 1.0);
  }
  SECTION("output is a permutation with non-increasing scores") {
    Rng rng(10);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Sentence> in;
      const std::size_t n = 1 + rng.below(8);
      for (std::size_t i = 0; i < n; ++i) {
        Sentence s;
        const std::size_t len = 1 + rng.below(5);
        for (std::size_t k = 0; k < len; ++k) s.tokens.push_back(std::string(1, static_cast<char>('a' + rng.below(4))));
        in.push_back(s);
      }
      const auto out = rank_sentences(in);
      REQUIRE(out.size() == in.size());
      for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
      auto key = [](const std::vector<Sentence>& v) {
        std::vector<std::vector<std::string>> k;
        for (const auto& s : v) k.push_back(s.tokens);
        std::sort(k.begin(), k.end());
        return k;
      };
      CHECK(key(out) == key(in));
    }
  }
}

TEST_CASE("preprocess_pipeline") {
  const auto& p = shipped_pipeline();
  SECTION("all-stopword text is rejected") {
    CHECK_THROWS_AS(preprocess_pipeline({"d", "اور کے کی۔ ہے", "اور"}, p), EmptyAfterPreprocessing);
  }
  SECTION("one sentence with no stopwords or rules is just tokenized") {
    const auto out = preprocess_pipeline({"d", "آج بارش", "بارش"}, p);
    CHECK(out.source == word_tokenize(normalize_text("آج بارش", p.table)));
    CHECK(out.summary == std::vector<std::string>{"بارش"});
  }
  SECTION("sentences come out in rank order, truncated") {
    Pipeline small = p;
    small.config.max_source_tokens = 4;
    // frequencies: بارش 3, آج 1, کل 1, دھوپ 1, شہر 1
    // S1 [آج بارش] 2.0, S2 [کل دھوپ] 1.0, S3 [بارش بارش شہر] 7/3
    const auto out = preprocess_pipeline({"d", "آج بارش۔ کل دھوپ۔ بارش بارش شہر۔", "x"}, small);
    CHECK(out.source == std::vector<std::string>{"بارش", "بارش", "شہر", "آج"});
  }
  SECTION("the summary is normalized, lemmatized and filtered in document order") {
    const auto out = preprocess_pipeline({"d", "آج بارش", "لوگوں نے گھریلو کام کیا۔ کِتاب"}, p);
    CHECK(out.summary == std::vector<std::string>{"لوگ", "گھر", "کام", "کیا", "کتاب"});
  }
}
