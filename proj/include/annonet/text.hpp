#pragma once

// String helpers shared by the entity normalizer, the corpus reader and the
// quote matcher. Everything here is byte-oriented UTF-8; "folding" maps the
// Latin letters that show up in party names (Türkiye, Côte d'Ivoire) onto
// plain ASCII so that comparisons are stable across spellings.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace annonet::text {

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

/// Collapses every whitespace run to one space and trims the ends.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <typename Range>
std::string join(const Range& parts, std::string_view sep) {
  std::string out;
  bool first = true;
  for (const auto& p : parts) {
    if (!first) out.append(sep);
    out.append(p);
    first = false;
  }
  return out;
}

namespace detail {

// Mac Roman high bytes that leak into scraped names as literal "\x9f"-style
// escapes or as stray single bytes. Only letters seen in party names.
struct MojibakeEntry {
  unsigned char byte;
  const char* replacement;
};

inline constexpr std::array<MojibakeEntry, 17> kMojibake{{
    {0x87, "a"}, {0x88, "a"}, {0x89, "a"}, {0x8a, "a"}, {0x8d, "c"}, {0x8e, "e"},
    {0x8f, "e"}, {0x90, "e"}, {0x92, "i"}, {0x94, "i"}, {0x96, "n"}, {0x97, "o"},
    {0x99, "o"}, {0x9a, "o"}, {0x9c, "u"}, {0x9f, "u"}, {0x8c, "a"},
}};

inline const char* mojibake_replacement(unsigned char b) noexcept {
  for (const auto& e : kMojibake)
    if (e.byte == b) return e.replacement;
  return nullptr;
}

inline int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// U+00C0..U+00FF
inline constexpr std::array<const char*, 64> kLatin1{
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
    "D", "N", "O", "O", "O", "O", "O", " ", "O", "U", "U", "U", "U", "Y", "TH", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", " ", "o", "u", "u", "u", "u", "y", "th", "y"};

// U+0100..U+017F
inline constexpr std::string_view kLatinExtA =
    "AaAaAaCcCcCcCcDd"
    "DdEeEeEeEeEeGgGg"
    "GgGgHhHhIiIiIiIi"
    "IiIiJjKkkLlLlLlL"
    "lLlNnNnNnnNnOoOo"
    "OoOoRrRrRrSsSsSs"
    "SsTtTtTtUuUuUuUu"
    "UuUuWwYyYZzZzZzs";
static_assert(kLatinExtA.size() == 128);

// Decodes one UTF-8 sequence at s[i]; returns {codepoint, length} or
// {-1, 1} for an invalid lead or truncated sequence.
inline std::pair<std::int32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  std::int32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {-1, 1};
  }
  if (i + len > s.size()) return {-1, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {-1, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

}  // namespace detail

/// Replaces Mac Roman mojibake (literal "\xNN" escapes and stray bytes) using
/// a fixed substitution table. Unknown stray bytes are dropped.
inline std::string repair_mojibake(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '\\' && i + 3 < s.size() && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
      const int hi = detail::hex_value(s[i + 2]);
      const int lo = detail::hex_value(s[i + 3]);
      if (hi >= 0 && lo >= 0) {
        if (const char* rep = detail::mojibake_replacement(static_cast<unsigned char>(hi * 16 + lo))) {
          out.append(rep);
          i += 4;
          continue;
        }
      }
    }
    const auto [cp, len] = detail::decode_utf8(s, i);
    if (cp < 0) {
      if (const char* rep = detail::mojibake_replacement(static_cast<unsigned char>(s[i])))
        out.append(rep);
      i += 1;
      continue;
    }
    out.append(s.substr(i, len));
    i += len;
  }
  return out;
}

/// Case-folds and strips diacritics from common Latin letters. Input is
/// expected to be valid UTF-8 (run repair_mojibake first).
inline std::string fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto [cp, len] = detail::decode_utf8(s, i);
    if (cp < 0) {
      ++i;
      continue;
    }
    if (cp < 0x80) {
      out.push_back(static_cast<char>(std::tolower(cp)));
    } else if (cp == 0x00A0) {
      out.push_back(' ');
    } else if (cp >= 0x00C0 && cp <= 0x00FF) {
      out.append(ascii_lower(detail::kLatin1[cp - 0x00C0]));
    } else if (cp >= 0x0100 && cp <= 0x017F) {
      out.push_back(static_cast<char>(std::tolower(detail::kLatinExtA[cp - 0x0100])));
    } else if (cp == 0x2018 || cp == 0x2019) {
      out.push_back('\'');
    } else if (cp == 0x201C || cp == 0x201D) {
      out.push_back('"');
    } else if (cp == 0x2013 || cp == 0x2014) {
      out.push_back('-');
    } else {
      out.append(s.substr(i, len));
    }
    i += len;
  }
  return out;
}

/// Case-folded word tokens: whitespace split, then leading/trailing
/// punctuation stripped; tokens that become empty are dropped.
inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (auto& raw : split_whitespace(fold(s))) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    auto punct = [](char c) {
      const auto u = static_cast<unsigned char>(c);
      return u < 0x80 && std::ispunct(u);
    };
    while (b < e && punct(raw[b])) ++b;
    while (e > b && punct(raw[e - 1])) --e;
    if (e > b) out.push_back(raw.substr(b, e - b));
  }
  return out;
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 1 - levenshtein / max(len); two empty strings are identical.
inline double edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

}  // namespace annonet::text
