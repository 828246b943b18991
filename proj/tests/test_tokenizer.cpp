#include "logrca/tokenizer.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace logrca;

namespace {
std::vector<std::string> toks(std::string_view s, const TokenizerConfig &c = {}) { return tokenize(s, c).tokens; }
} // namespace

TEST(Tokenizer, WorkedExample) {
  EXPECT_EQ(toks("Network ip: 192.168.0.1 weak connection"),
            (std::vector<std::string>{"[CLS]", "Network", "ip", "[IP]", "weak", "connection"}));
}

TEST(Tokenizer, SingleTokenAndMixedPlaceholders) {
  EXPECT_EQ(toks("ok"), (std::vector<std::string>{"[CLS]", "ok"}));
  EXPECT_EQ(toks("retry 42 of 7 at 0xFF3A"),
            (std::vector<std::string>{"[CLS]", "retry", "[NUM]", "of", "7", "at", "[HEX]"}));
}

TEST(Tokenizer, SeparatorRunsCollapse) {
  EXPECT_EQ(toks(" a,,: b\t\tc "), (std::vector<std::string>{"[CLS]", "a", "b", "c"}));
  EXPECT_EQ(toks(",: \t"), std::vector<std::string>{"[CLS]"});
  EXPECT_EQ(toks(""), std::vector<std::string>{"[CLS]"});
}

TEST(Tokenizer, PriorityResolvesOverlaps) {
  EXPECT_EQ(toks("1234")[1], "[NUM]"); // digits only: not HEX
  EXPECT_EQ(toks("12ab")[1], "[HEX]");
  EXPECT_EQ(toks("abc")[1], "abc");    // too short for bare HEX
  EXPECT_EQ(toks("10.0.0.1")[1], "[IP]");
  EXPECT_EQ(toks("256.0.0.1")[1], "256.0.0.1");
  EXPECT_EQ(toks("@svc1.obj2")[1], "[ADDR]");
  EXPECT_EQ(toks("9")[1], "9");
  EXPECT_EQ(toks("10")[1], "[NUM]");
  EXPECT_EQ(toks("99999999999999999999999")[1], "[NUM]");
}

TEST(Tokenizer, ThresholdAndAddrPatternAreConfigurable) {
  TokenizerConfig c;
  c.num_threshold = 100;
  EXPECT_EQ(toks("42 420", c), (std::vector<std::string>{"[CLS]", "42", "[NUM]"}));
  c.addr_pattern = "obj_[0-9]+";
  EXPECT_EQ(toks("obj_12 @x", c), (std::vector<std::string>{"[CLS]", "[ADDR]", "@x"}));
  c.addr_pattern = "(";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Tokenizer, PlaceholderFuzz) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto t = oracle::fuzz_token(rng);
    const auto got = toks(t.text);
    ASSERT_EQ(got.size(), 2u) << t.text;
    ASSERT_EQ(got[1], t.expected) << t.text;
  }
}

TEST(Tokenizer, PlaceholdersNeverIncreaseUniqueLines) {
  std::mt19937_64 rng(5);
  std::set<std::string> raw, abstracted;
  for (int i = 0; i < 2000; ++i) {
    std::string line = "req";
    for (int k = 0; k < 3; ++k) line += " " + oracle::fuzz_token(rng).text;
    raw.insert(line);
    std::string joined;
    for (const auto &t : toks(line)) joined += t + " ";
    abstracted.insert(joined);
  }
  EXPECT_LE(abstracted.size(), raw.size());
}

TEST(Vocabulary, FrequencyOrderWithLexicographicTies) {
  std::vector<TokenSequence> corpus{{{"a", "a", "b"}, 0}};
  const auto v = build_vocab(corpus, 1);
  ASSERT_EQ(v.size(), tok::kReserved.size() + 2);
  EXPECT_EQ(v.token(7), "a");
  EXPECT_EQ(v.token(8), "b");

  std::vector<TokenSequence> ties{{{"b", "a"}, 0}};
  const auto t = build_vocab(ties, 1);
  EXPECT_EQ(t.token(7), "a");
  EXPECT_EQ(t.token(8), "b");
}

TEST(Vocabulary, ReservedIdsAndThreshold) {
  std::vector<TokenSequence> corpus{{{"a"}, 0}};
  const auto v = build_vocab(corpus, 2);
  EXPECT_EQ(v.size(), tok::kReserved.size());
  for (std::size_t i = 0; i < tok::kReserved.size(); ++i) {
    EXPECT_EQ(v.id(std::string(tok::kReserved[i])), static_cast<std::int32_t>(i));
  }
  EXPECT_EQ(v.id("a"), tok::kUnkId);
  EXPECT_THROW(build_vocab(corpus, 0), ConfigError);
  EXPECT_EQ(build_vocab(std::vector<TokenSequence>{}, 1).size(), tok::kReserved.size());
}

TEST(Vocabulary, JsonRoundTrip) {
  std::vector<TokenSequence> corpus{tokenize("alpha beta 10.0.0.1 beta")};
  const auto v = build_vocab(corpus, 1);
  const auto path = std::filesystem::temp_directory_path() / "logrca_vocab_test.json";
  v.save(path.string());
  const auto back = Vocabulary::load(path.string());
  EXPECT_EQ(back.to_json(), v.to_json());
  EXPECT_EQ(v.to_json()["version"], 1);
  std::filesystem::remove(path);
}

TEST(Encode, PadTruncateAndUnknown) {
  TokenizerConfig c;
  c.max_len = 5;
  std::vector<TokenSequence> corpus{tokenize("x y")};
  const auto v = build_vocab(corpus, 1);
  const auto e = encode(tokenize("x y"), v, c);
  EXPECT_EQ(e.size(), 5u);
  EXPECT_EQ(e[0], tok::kClsId);
  EXPECT_EQ(e[3], tok::kPadId);
  EXPECT_EQ(e[4], tok::kPadId);
  EXPECT_EQ(decode(e, v), (std::vector<std::string>{"[CLS]", "x", "y"}));

  const auto u = encode(tokenize("x zzz"), v, c);
  EXPECT_EQ(u[2], tok::kUnkId);

  std::string longline;
  for (int i = 0; i < 30; ++i) longline += "x ";
  TokenizerConfig d;
  const auto t = encode(tokenize(longline), v, d);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t[0], tok::kClsId);
  EXPECT_EQ(t[23], v.id("x"));
}
