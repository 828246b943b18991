#pragma once

#include "logrca/error.hpp"
#include "logrca/log_model.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace logrca {

namespace tok {
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kIp = "[IP]";
inline constexpr std::string_view kNum = "[NUM]";
inline constexpr std::string_view kHex = "[HEX]";
inline constexpr std::string_view kAddr = "[ADDR]";
inline constexpr std::string_view kUnk = "[UNK]";

inline constexpr std::array<std::string_view, 7> kReserved = {kPad, kCls,  kIp, kNum,
                                                              kHex, kAddr, kUnk};
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kClsId = 1;
inline constexpr std::int32_t kUnkId = 6;
} // namespace tok

struct TokenizerConfig {
  /// Sequence length including the leading class token.
  int max_len = 24;
  /// Decimal integers >= this value become [NUM].
  std::uint64_t num_threshold = 10;
  std::string addr_pattern = "@[A-Za-z0-9_.]+";

  void validate() const {
    if (max_len < 2) throw ConfigError("tokenizer max_len must be >= 2");
    try {
      std::regex re(addr_pattern);
    } catch (const std::regex_error &e) {
      throw ConfigError("invalid addr_pattern: " + std::string(e.what()));
    }
  }
};

inline void to_json(nlohmann::json &j, const TokenizerConfig &c) {
  j = {{"max_len", c.max_len}, {"num_threshold", c.num_threshold}, {"addr_pattern", c.addr_pattern}};
}

inline void from_json(const nlohmann::json &j, TokenizerConfig &c) {
  c.max_len = j.value("max_len", c.max_len);
  c.num_threshold = j.value("num_threshold", c.num_threshold);
  c.addr_pattern = j.value("addr_pattern", c.addr_pattern);
}

struct TokenSequence {
  std::vector<std::string> tokens;
  LineId origin = 0;
};

inline bool is_separator(char c) {
  return c == ',' || c == ':' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
         c == '\f' || c == '\v';
}

inline bool is_ipv4(std::string_view t) {
  int octets = 0;
  std::size_t i = 0;
  while (true) {
    std::size_t start = i;
    int value = 0;
    while (i < t.size() && t[i] >= '0' && t[i] <= '9') {
      value = value * 10 + (t[i] - '0');
      if (i - start >= 3 || value > 255) return false;
      ++i;
    }
    if (i == start) return false;
    ++octets;
    if (i == t.size()) return octets == 4;
    if (t[i] != '.' || octets == 4) return false;
    ++i;
  }
}

inline bool is_hex_digit(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

/// "0x"-prefixed literal, or at least four hex digits including a letter.
inline bool is_hex(std::string_view t) {
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
    return std::all_of(t.begin() + 2, t.end(), is_hex_digit);
  }
  if (t.size() < 4) return false;
  bool letter = false;
  for (char c : t) {
    if (!is_hex_digit(c)) return false;
    letter |= !(c >= '0' && c <= '9');
  }
  return letter;
}

/// Decimal integer whose value is at least `threshold`.
inline bool is_large_number(std::string_view t, std::uint64_t threshold) {
  if (t.empty()) return false;
  if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  auto nz = t.find_first_not_of('0');
  if (nz == std::string_view::npos) return threshold == 0;
  t.remove_prefix(nz);
  if (t.size() > 19) return true;
  std::uint64_t v = 0;
  for (char c : t) v = v * 10 + static_cast<std::uint64_t>(c - '0');
  return v >= threshold;
}

/// Splits on comma, colon and whitespace, replaces IP/HEX/ADDR/NUM tokens
/// with placeholders (in that priority), and prepends [CLS].
class Tokenizer {
public:
  explicit Tokenizer(TokenizerConfig config = {})
      : config_(std::move(config)), addr_re_(config_.addr_pattern, std::regex::optimize) {
    config_.validate();
  }

  const TokenizerConfig &config() const { return config_; }

  std::string_view classify(std::string_view t) const {
    if (is_ipv4(t)) return tok::kIp;
    if (is_hex(t)) return tok::kHex;
    if (t.find('@') != std::string_view::npos || config_.addr_pattern != kDefaultAddr) {
      if (std::regex_match(t.begin(), t.end(), addr_re_)) return tok::kAddr;
    }
    if (is_large_number(t, config_.num_threshold)) return tok::kNum;
    return {};
  }

  TokenSequence tokenize(std::string_view content, LineId origin = 0) const {
    TokenSequence seq;
    seq.origin = origin;
    seq.tokens.emplace_back(tok::kCls);
    std::size_t i = 0;
    while (i < content.size()) {
      while (i < content.size() && is_separator(content[i])) ++i;
      std::size_t j = i;
      while (j < content.size() && !is_separator(content[j])) ++j;
      if (j > i) {
        std::string_view t = content.substr(i, j - i);
        std::string_view ph = classify(t);
        seq.tokens.emplace_back(ph.empty() ? t : ph);
      }
      i = j;
    }
    return seq;
  }

private:
  static constexpr std::string_view kDefaultAddr = "@[A-Za-z0-9_.]+";

  TokenizerConfig config_;
  std::regex addr_re_;
};

inline TokenSequence tokenize(std::string_view content, const TokenizerConfig &config = {}) {
  return Tokenizer(config).tokenize(content);
}

/// Token <-> id map. Reserved tokens occupy ids 0..6.
class Vocabulary {
public:
  Vocabulary() {
    for (auto r : tok::kReserved) add(std::string(r));
  }

  std::int32_t id(const std::string &token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? tok::kUnkId : it->second;
  }

  bool contains(const std::string &token) const { return ids_.count(token) != 0; }

  const std::string &token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw DataError("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  nlohmann::json to_json() const { return {{"version", 1}, {"tokens", tokens_}}; }

  static Vocabulary from_json(const nlohmann::json &j) {
    if (j.value("version", 0) != 1) throw DataError("unsupported vocabulary version");
    Vocabulary v;
    const auto &toks = j.at("tokens");
    if (toks.size() < tok::kReserved.size()) throw DataError("vocabulary lacks reserved tokens");
    for (std::size_t i = 0; i < tok::kReserved.size(); ++i) {
      if (toks[i].get<std::string>() != tok::kReserved[i]) {
        throw DataError("vocabulary reserved token mismatch at id " + std::to_string(i));
      }
    }
    for (std::size_t i = tok::kReserved.size(); i < toks.size(); ++i) {
      if (!v.add(toks[i].get<std::string>())) throw DataError("duplicate vocabulary token");
    }
    return v;
  }

  void save(const std::string &path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary " + path);
    out << to_json().dump() << '\n';
  }

  static Vocabulary load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary " + path);
    return from_json(nlohmann::json::parse(in));
  }

  bool add(std::string token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(std::move(token));
    return inserted;
  }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Tokens with frequency >= min_count, by descending frequency then
/// lexicographically.
template <typename Range>
Vocabulary build_vocab(const Range &sequences, std::size_t min_count = 1) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const TokenSequence &seq : sequences) {
    for (const auto &t : seq.tokens) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto &[t, n] : freq) {
    bool reserved = std::find(tok::kReserved.begin(), tok::kReserved.end(), t) !=
                    tok::kReserved.end();
    if (!reserved && n >= min_count) ranked.emplace_back(t, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  Vocabulary v;
  for (auto &[t, n] : ranked) v.add(t);
  return v;
}

using EncodedSequence = std::vector<std::int32_t>;

/// Fixed-length id vector: truncate to max_len, pad with [PAD], map unknown
/// tokens to [UNK].
inline EncodedSequence encode(const TokenSequence &seq, const Vocabulary &vocab,
                              const TokenizerConfig &config) {
  const auto len = static_cast<std::size_t>(config.max_len);
  EncodedSequence ids(len, tok::kPadId);
  const std::size_t n = std::min(len, seq.tokens.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(seq.tokens[i]);
  return ids;
}

/// Inverse of encode with padding stripped.
inline std::vector<std::string> decode(const EncodedSequence &ids, const Vocabulary &vocab) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == tok::kPadId) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

} // namespace logrca
