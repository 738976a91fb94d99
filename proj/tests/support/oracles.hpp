#pragma once

// Reference implementations used as test oracles. They are written for
// clarity, not speed, and share no code with the library beyond types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

/// Minimal UTF-8 decoder for well-formed input.
inline std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string utf8_encode(const std::u32string& s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

/// Full-table Wagner-Fischer.
inline std::size_t levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
    }
  }
  return d[a.size()][b.size()];
}

inline double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto ca = utf8_decode(a);
  const auto cb = utf8_decode(b);
  return static_cast<double>(levenshtein(ca, cb)) / ((ca.size() + cb.size()) / 2.0);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / std::sqrt(nu * nv);
}

struct Link {
  std::size_t i, j;
  double p;
};

/// Mutual argmax on the raw similarities (softmax is monotone, so its
/// argmax sets are the argmax sets of the raw rows and columns). Tied
/// candidates are taken in order of i + j, then i, skipping used rows and
/// columns. p uses an unshifted softmax.
inline std::vector<Link> alignment(const std::vector<std::vector<double>>& sim) {
  const std::size_t R = sim.size();
  if (R == 0) return {};
  const std::size_t C = sim[0].size();
  std::vector<std::pair<std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      bool row_max = true, col_max = true;
      for (std::size_t jj = 0; jj < C; ++jj) row_max = row_max && sim[i][jj] <= sim[i][j];
      for (std::size_t ii = 0; ii < R; ++ii) col_max = col_max && sim[ii][j] <= sim[i][j];
      if (row_max && col_max) cand.emplace_back(i, j);
    }
  }
  std::vector<bool> row_used(R), col_used(C);
  std::vector<Link> links;
  while (true) {
    std::size_t best = cand.size();
    for (std::size_t k = 0; k < cand.size(); ++k) {
      const auto [i, j] = cand[k];
      if (row_used[i] || col_used[j]) continue;
      if (best == cand.size() || i + j < cand[best].first + cand[best].second ||
          (i + j == cand[best].first + cand[best].second && i < cand[best].first)) {
        best = k;
      }
    }
    if (best == cand.size()) break;
    const auto [i, j] = cand[best];
    row_used[i] = col_used[j] = true;
    double row_sum = 0, col_sum = 0;
    for (std::size_t jj = 0; jj < C; ++jj) row_sum += std::exp(sim[i][jj]);
    for (std::size_t ii = 0; ii < R; ++ii) col_sum += std::exp(sim[ii][j]);
    const double e = std::exp(sim[i][j]);
    links.push_back({i, j, std::sqrt((e / row_sum) * (e / col_sum))});
  }
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.i < b.i; });
  return links;
}

/// Pearson r from the textbook formula.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Random code point from a mix of ASCII, Latin-1 letters, Greek, CJK and
/// astral-plane ranges.
inline char32_t random_code_point(std::mt19937_64& gen) {
  static const std::pair<char32_t, char32_t> ranges[] = {
      {U'a', U'e'}, {U'A', U'Z'}, {0xE0, 0xFF}, {0x391, 0x3A9}, {0x4E00, 0x4E10}, {0x1F600, 0x1F60F}};
  const auto& r = ranges[gen() % std::size(ranges)];
  return r.first + static_cast<char32_t>(gen() % (r.second - r.first + 1));
}

inline std::string random_word(std::mt19937_64& gen, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + gen() % (max_len - min_len + 1);
  std::u32string s;
  for (std::size_t k = 0; k < len; ++k) s.push_back(random_code_point(gen));
  return utf8_encode(s);
}

}  // namespace oracle
