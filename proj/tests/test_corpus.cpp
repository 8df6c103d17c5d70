#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <urdusum/corpus.hpp>
#include <urdusum/rng.hpp>

using namespace urdusum;

namespace {

Vocabulary abc_vocab() { return Vocabulary({"<pad>", "<s>", "</s>", "<unk>", "a", "b", "c", "d"}); }

std::vector<std::string> ids_of(const std::vector<RawDocument>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.id);
  return out;
}

std::vector<RawDocument> numbered_docs(int n) {
  std::vector<RawDocument> docs;
  for (int i = 0; i < n; ++i) docs.push_back({"d" + std::to_string(i), "t", "s"});
  return docs;
}

}  // namespace

TEST_CASE("generators follow the published recurrences") {
  SplitMix64 sm(0);
  CHECK(sm.next() == 0xe220a8397b1dcdafULL);
  CHECK(sm.next() == 0x6e789e6aa1b965f4ULL);

  Rng zero(0);
  CHECK(zero.next() == 0x99ec5f36cb75f2b4ULL);
  CHECK(zero.next() == 0xbf6e1f784956452aULL);
  Rng one(1);
  CHECK(one.next() == 0xb3f2af6d0fc710c5ULL);
  CHECK(one.next() == 0x853b559647364ceaULL);
  CHECK(one.next() == 0x92f89756082a4514ULL);
  Rng answer(42);
  CHECK(answer.next() == 0x15780b2e0c2ec716ULL);
}

TEST_CASE("Rng helpers stay in range") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7);
  }
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  rng.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("load_corpus") {
  SECTION("empty input") {
    std::istringstream in("");
    CHECK(load_corpus(in, "c.jsonl").empty());
  }
  SECTION("documents come back in file order") {
    std::istringstream in(R"({"id":"b","text":"t1","summary":"s1"}
{"id":"a","text":"t2","summary":"s2"}

{"id":"c","text":"t3","summary":"s3"}
)");
    const auto docs = load_corpus(in, "c.jsonl");
    CHECK(ids_of(docs) == std::vector<std::string>{"b", "a", "c"});
    CHECK(docs[1] == RawDocument{"a", "t2", "s2"});
  }
  SECTION("a missing field names the line") {
    std::istringstream in("{\"id\":\"a\",\"text\":\"t\",\"summary\":\"s\"}\n{\"id\":\"b\",\"text\":\"t\"}\n");
    try {
      load_corpus(in, "c.jsonl");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.file() == "c.jsonl");
      CHECK(std::string(e.what()).starts_with("c.jsonl:2:"));
    }
  }
  SECTION("malformed JSON, empty fields and non-string fields are rejected") {
    for (const char* bad : {"{nope", R"({"id":"a","text":"","summary":"s"})", R"({"id":1,"text":"t","summary":"s"})",
                            R"(["a","t","s"])"}) {
      std::istringstream in(bad);
      CHECK_THROWS_AS(load_corpus(in, "c.jsonl"), ParseError);
    }
  }
  SECTION("repeated ids") {
    std::istringstream in(R"({"id":"a","text":"t","summary":"s"}
{"id":"a","text":"u","summary":"v"})");
    CHECK_THROWS_AS(load_corpus(in, "c.jsonl"), DuplicateId);
  }
}

TEST_CASE("split_corpus") {
  SECTION("sizes") {
    CHECK(train_size(10, 0.7) == 7);
    CHECK(train_size(3, 0.7) == 2);
    CHECK(train_size(2, 0.1) == 1);
    CHECK(train_size(2, 0.99) == 1);
    const auto s = split_corpus(numbered_docs(10), 0.7, 5);
    CHECK(s.train.size() == 7);
    CHECK(s.test.size() == 3);
  }
  SECTION("default fraction is 0.7") { CHECK(kDefaultTrainFraction == 0.7); }
  SECTION("deterministic per seed and a partition") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto a = split_corpus(numbered_docs(13), 0.7, seed);
      const auto b = split_corpus(numbered_docs(13), 0.7, seed);
      CHECK(ids_of(a.train) == ids_of(b.train));
      CHECK(ids_of(a.test) == ids_of(b.test));
      std::multiset<std::string> all;
      for (const auto& v : {a.train, a.test})
        for (const auto& d : v) all.insert(d.id);
      CHECK(all == std::multiset<std::string>{"d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9", "d10", "d11",
                                             "d12"});
    }
    CHECK(ids_of(split_corpus(numbered_docs(13), 0.7, 1).train) !=
          ids_of(split_corpus(numbered_docs(13), 0.7, 2).train));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(split_corpus(numbered_docs(1), 0.7, 0), TooFewDocuments);
    CHECK_THROWS_AS(split_corpus(numbered_docs(5), 1.0, 0), InvalidArgument);
    CHECK_THROWS_AS(split_corpus(numbered_docs(5), 0.0, 0), InvalidArgument);
  }
}

TEST_CASE("Vocabulary invariants") {
  const Vocabulary v = abc_vocab();
  CHECK(v.size() == 8);
  for (TokenId i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
  CHECK(v.id("zzz") == kUnk);
  CHECK_THROWS_AS(v.token(8), IdOutOfRange);
  CHECK_THROWS_AS(Vocabulary({"<pad>", "<s>", "</s>", "<unk>"}), InvalidArgument);
  CHECK_THROWS_AS(Vocabulary({"<s>", "<pad>", "</s>", "<unk>", "a"}), InvalidArgument);
  CHECK_THROWS_AS(Vocabulary({"<pad>", "<s>", "</s>", "<unk>", "a", "a"}), InvalidArgument);
}

TEST_CASE("build_vocab") {
  SECTION("min_freq filters") {
    const std::vector<TokenizedPair> pairs{{"1", {"x", "y", "x"}, {"x"}}};
    const Vocabulary v = build_vocab(pairs, 2);
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<s>", "</s>", "<unk>", "x"});
  }
  SECTION("every distinct token with min_freq 1") {
    const std::vector<TokenizedPair> pairs{{"1", {"p", "q"}, {"r"}}, {"2", {"q"}, {"s", "p"}}};
    const Vocabulary v = build_vocab(pairs);
    CHECK(v.size() == 8);
    for (const char* t : {"p", "q", "r", "s"}) CHECK(v.find(t).has_value());
  }
  SECTION("frequency order, ties by first occurrence") {
    const std::vector<TokenizedPair> pairs{{"1", {"m", "n", "o", "o"}, {"n"}}};
    const Vocabulary v = build_vocab(pairs);
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<s>", "</s>", "<unk>", "n", "o", "m"});
  }
  SECTION("max_size caps the total") {
    const std::vector<TokenizedPair> pairs{{"1", {"a", "b", "c", "a"}, {}}};
    CHECK(build_vocab(pairs, 1, 5).tokens() == std::vector<std::string>{"<pad>", "<s>", "</s>", "<unk>", "a"});
  }
  SECTION("deterministic") {
    const std::vector<TokenizedPair> pairs{{"1", {"u", "v", "w"}, {"v"}}, {"2", {"w"}, {"u"}}};
    CHECK(build_vocab(pairs) == build_vocab(pairs));
  }
}

TEST_CASE("encode") {
  const Vocabulary v = abc_vocab();
  using Ids = TokenIds;
  CHECK(encode(std::vector<std::string>{}, v, 4, true) == Ids{kSos, kEos, kPad, kPad});
  CHECK(encode(std::vector<std::string>{"x"}, v, 2, false) == Ids{kUnk, kPad});
  CHECK(encode(std::vector<std::string>{"a", "b", "c", "d"}, v, 4, true) == Ids{kSos, 4, 5, kEos});
  CHECK(encode(std::vector<std::string>{"a", "b", "c"}, v, 2, false) == Ids{4, 5});
  CHECK_THROWS_AS(encode(std::vector<std::string>{}, v, 2, true), InvalidArgument);
  SECTION("length is always max_len") {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
      std::vector<std::string> t(rng.below(12), "a");
      const std::size_t len = 3 + rng.below(8);
      CHECK(encode(t, v, len, true).size() == len);
      CHECK(encode(t, v, len, false).size() == len);
    }
  }
}

TEST_CASE("decode_ids") {
  const Vocabulary v = abc_vocab();
  CHECK(decode_ids(TokenIds{kSos, 4, kEos, kPad}, v) == std::vector<std::string>{"a"});
  CHECK(decode_ids(TokenIds{kPad, kPad}, v).empty());
  CHECK(decode_ids(TokenIds{5, kEos, 6}, v) == std::vector<std::string>{"b"});
  CHECK_THROWS_AS(decode_ids(TokenIds{4, 99}, v), IdOutOfRange);
  SECTION("round trip for in-vocabulary tokens") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      const std::size_t max_len = 3 + rng.below(8);
      std::vector<std::string> t;
      for (std::size_t k = 0, n = rng.below(max_len - 1); k < n; ++k) t.push_back(v.token(4 + rng.below(4)));
      CHECK(decode_ids(encode(t, v, max_len, true), v) == t);
    }
  }
}

TEST_CASE("encode_pair and validate_pair") {
  const Vocabulary v = abc_vocab();
  const EncodedPair p = encode_pair({"1", {"a", "z"}, {"b"}}, v, 4, 5);
  CHECK(p.source_ids == TokenIds{4, kUnk, kPad, kPad});
  CHECK(p.target_ids == TokenIds{kSos, 5, kEos, kPad, kPad});
  CHECK_NOTHROW(validate_pair(p, v.size(), 4, 5));
  CHECK(eos_index(p.target_ids) == 2);
  CHECK_THROWS_AS(validate_pair(p, v.size(), 3, 5), ShapeMismatch);
  CHECK_THROWS_AS(validate_pair(p, 5, 4, 5), IdOutOfRange);
  EncodedPair gap = p;
  gap.target_ids = {kSos, kPad, kEos, kPad, kPad};
  CHECK_THROWS_AS(validate_pair(gap, v.size(), 4, 5), InvalidArgument);
}
