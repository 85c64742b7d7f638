#pragma once
// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library's scoring or statistics code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crowdcensus/types.hpp"

namespace oracle {

using crowdcensus::AnnotationResponse;

// Minimal exact fraction over __int128, independent of crowdcensus::Rational.
struct Frac {
  __int128 p = 0;
  __int128 q = 1;

  Frac() = default;
  Frac(__int128 a, __int128 b = 1) : p(a), q(b) {
    if (q < 0) p = -p, q = -q;
    __int128 g = gcd(p < 0 ? -p : p, q);
    if (g > 1) p /= g, q /= g;
  }
  static __int128 gcd(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }
  friend Frac operator+(Frac a, Frac b) { return Frac(a.p * b.q + b.p * a.q, a.q * b.q); }
  friend Frac operator-(Frac a, Frac b) { return Frac(a.p * b.q - b.p * a.q, a.q * b.q); }
  friend Frac operator*(Frac a, Frac b) { return Frac(a.p * b.p, a.q * b.q); }
  friend Frac operator/(Frac a, Frac b) { return Frac(a.p * b.q, a.q * b.p); }
  friend bool operator<(Frac a, Frac b) { return a.p * b.q < b.p * a.q; }
  friend bool operator>(Frac a, Frac b) { return b < a; }
  friend bool operator<=(Frac a, Frac b) { return !(b < a); }
  friend bool operator>=(Frac a, Frac b) { return !(a < b); }
  friend bool operator==(Frac a, Frac b) { return a.p == b.p && a.q == b.q; }
  Frac abs() const { return Frac(p < 0 ? -p : p, q); }
};

inline Frac weight_of(crowdcensus::Confidence c) {
  switch (c) {
    case crowdcensus::Confidence::Low: return Frac(1, 3);
    case crowdcensus::Confidence::Medium: return Frac(2, 3);
    case crowdcensus::Confidence::High: return Frac(1);
  }
  return Frac(0);
}

// Consensus outcome in plain tokens so comparisons against the library do
// not depend on its enums beyond the input types.
struct Outcome {
  std::string iia;        // "iia", "non_iia", "undetermined"
  std::string gender;     // "man", "woman", ""
  std::string ethnicity;  // group token, "multiple", ""
  int region = -1;        // Region index or -1
  std::optional<int> decade;
};

// Default campaign rules: gender |s| >= 13/20, ethnicity s > 13/20, region
// s >= 4/5, three supporting answers, z cut 1, one-year typo allowance,
// exact halves rounded to the lower decade.
inline Outcome brute_force(const std::vector<AnnotationResponse>& rs,
                           const std::map<std::string, int>& country_region) {
  using namespace crowdcensus;
  Outcome o;
  int yes = 0;
  for (const auto& r : rs) yes += r.iia == IiaAnswer::Yes;
  int n = static_cast<int>(rs.size());
  if (n < 3) {
    o.iia = "undetermined";
    return o;
  }
  if (!(yes * 2 > n)) {
    o.iia = "non_iia";
    return o;
  }
  o.iia = "iia";
  std::vector<const AnnotationResponse*> kept;
  for (const auto& r : rs) {
    if (r.iia != IiaAnswer::No) kept.push_back(&r);
  }

  // gender
  {
    Frac total;
    int m = 0;
    for (auto* r : kept) {
      if (!r->gender) continue;
      if (r->gender->category == GenderAnswer::Man) total = total - weight_of(r->gender->confidence);
      else if (r->gender->category == GenderAnswer::Woman) total = total + weight_of(r->gender->confidence);
      else continue;
      ++m;
    }
    if (m >= 3) {
      Frac mean = total / Frac(m);
      if (mean.abs() >= Frac(13, 20)) o.gender = mean < Frac(0) ? "man" : "woman";
    }
  }

  // ethnicity: five folded groups
  {
    static const char* names[] = {"asian", "black", "hispanic", "white", "other"};
    auto group_of = [](Ethnicity e) {
      switch (e) {
        case Ethnicity::Asian: return 0;
        case Ethnicity::Black: return 1;
        case Ethnicity::Hispanic: return 2;
        case Ethnicity::White: return 3;
        default: return 4;
      }
    };
    std::vector<Frac> sum(5);
    std::vector<int> cnt(5, 0);
    int m = 0;
    for (auto* r : kept) {
      if (!r->ethnicity || r->ethnicity->status != AnswerStatus::Answered || r->ethnicity->categories.empty()) continue;
      ++m;
      std::set<int> groups;
      for (auto e : r->ethnicity->categories) groups.insert(group_of(e));
      for (int g : groups) {
        sum[g] = sum[g] + weight_of(r->ethnicity->confidence);
        ++cnt[g];
      }
    }
    if (m > 0) {
      std::vector<int> hits;
      for (int g = 0; g < 5; ++g) {
        if (sum[g] / Frac(m) > Frac(13, 20) && cnt[g] >= 3) hits.push_back(g);
      }
      if (hits.size() == 1) o.ethnicity = names[hits[0]];
      if (hits.size() > 1) o.ethnicity = "multiple";
    }
  }

  // region
  {
    std::vector<Frac> sum(7);
    std::vector<int> cnt(7, 0);
    int m = 0;
    for (auto* r : kept) {
      if (!r->origin || r->origin->status != AnswerStatus::Answered) continue;
      auto it = country_region.find(r->origin->country);
      if (it == country_region.end()) continue;
      ++m;
      sum[it->second] = sum[it->second] + weight_of(r->origin->confidence);
      ++cnt[it->second];
    }
    int found = 0;
    for (int g = 0; g < 7 && m > 0; ++g) {
      if (sum[g] / Frac(m) >= Frac(4, 5) && cnt[g] >= 3) {
        o.region = g;
        ++found;
      }
    }
    if (found != 1) o.region = -1;
  }

  // birth decade
  {
    std::vector<std::pair<int, Frac>> ys;
    for (auto* r : kept) {
      if (!r->birth) continue;
      const std::string& s = r->birth->raw;
      std::size_t b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      std::string t = s.substr(b, e - b + 1);
      if (t.size() < 3 || t.size() > 4 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        continue;
      }
      ys.push_back({std::stoi(t), weight_of(r->birth->confidence)});
    }
    if (!ys.empty()) {
      Frac mean;
      for (auto& [y, w] : ys) mean = mean + Frac(y);
      mean = mean / Frac(static_cast<__int128>(ys.size()));
      Frac var;
      for (auto& [y, w] : ys) var = var + (Frac(y) - mean) * (Frac(y) - mean);
      var = var / Frac(static_cast<__int128>(ys.size()));
      bool filter = ys.size() > 2 && var > Frac(0);
      Frac wsum, wtot;
      int kept_n = 0;
      for (auto& [y, w] : ys) {
        Frac dev = (Frac(y) - mean).abs();
        bool outside = filter && dev * dev > var;  // |z| > 1
        if (outside && dev > Frac(1)) continue;
        wsum = wsum + w * Frac(y);
        wtot = wtot + w;
        ++kept_n;
      }
      if (kept_n >= 3) {
        Frac m = wsum / wtot;
        // nearest multiple of ten, lower one on an exact tie
        __int128 lo = m.p / m.q;
        if (m.p < 0 && m.p % m.q != 0) --lo;
        lo = (lo / 10) * 10;
        while (Frac(lo + 10) <= m) lo += 10;
        while (Frac(lo) > m) lo -= 10;
        Frac dlo = m - Frac(lo), dhi = Frac(lo + 10) - m;
        o.decade = static_cast<int>(dhi < dlo ? lo + 10 : lo);
      }
    }
  }
  return o;
}

// Textbook Wilson score interval.
inline std::pair<double, double> wilson(int k, int n, double z) {
  double p = static_cast<double>(k) / n;
  double z2 = z * z;
  double denom = 1 + z2 / n;
  double centre = (p + z2 / (2.0 * n)) / denom;
  double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Φ⁻¹ by bisection on 0.5·erfc(−x/√2).
inline double normal_quantile(double p) {
  double lo = -40, hi = 40;
  for (int i = 0; i < 400; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct ZTest {
  double z = 0;
  double p = 1;
};

// Group g against the union of all other groups, pooled variance.
inline ZTest two_proportion(int k1, int n1, int k2, int n2) {
  double p1 = static_cast<double>(k1) / n1, p2 = static_cast<double>(k2) / n2;
  double pool = static_cast<double>(k1 + k2) / (n1 + n2);
  double se = std::sqrt(pool * (1 - pool) * (1.0 / n1 + 1.0 / n2));
  if (se == 0) return {};
  ZTest t;
  t.z = (p1 - p2) / se;
  t.p = std::min(1.0, std::erfc(std::fabs(t.z) / std::sqrt(2.0)));
  return t;
}

struct OracleMerge {
  std::vector<std::string> a, b;  // a holds the smaller label
  double height;
};

// Average linkage recomputed from the raw distances at every step.
inline std::vector<OracleMerge> upgma(const std::vector<std::string>& labels,
                                      const std::vector<std::vector<double>>& d) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) clusters.push_back({i});
  auto min_label = [&](const std::vector<int>& c) {
    std::string m = labels[c[0]];
    for (int i : c) m = std::min(m, labels[i]);
    return m;
  };
  auto names = [&](const std::vector<int>& c) {
    std::vector<std::string> out;
    for (int i : c) out.push_back(labels[i]);
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<OracleMerge> merges;
  while (clusters.size() > 1) {
    std::size_t bi = 0, bj = 0;
    double best = 0;
    std::pair<std::string, std::string> best_key;
    bool have = false;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double s = 0;
        for (int x : clusters[i]) {
          for (int y : clusters[j]) s += d[x][y];
        }
        double h = s / (static_cast<double>(clusters[i].size()) * clusters[j].size());
        std::string li = min_label(clusters[i]), lj = min_label(clusters[j]);
        std::pair<std::string, std::string> k2 = li < lj ? std::pair(li, lj) : std::pair(lj, li);
        if (!have || h < best || (h == best && k2 < best_key)) {
          have = true;
          best = h;
          best_key = k2;
          bi = i;
          bj = j;
        }
      }
    }
    if (min_label(clusters[bj]) < min_label(clusters[bi])) std::swap(bi, bj);
    merges.push_back({names(clusters[bi]), names(clusters[bj]), best});
    auto merged = clusters[bi];
    merged.insert(merged.end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<long>(std::max(bi, bj)));
    clusters.erase(clusters.begin() + static_cast<long>(std::min(bi, bj)));
    clusters.push_back(merged);
  }
  return merges;
}

// Clusters left after replaying the first n-k merges, each sorted, ordered
// by smallest member.
inline std::vector<std::vector<std::string>> cut(const std::vector<std::string>& labels,
                                                 const std::vector<OracleMerge>& merges, int k) {
  std::vector<std::set<std::string>> parts;
  for (const auto& l : labels) parts.push_back({l});
  for (int t = 0; t < static_cast<int>(labels.size()) - k; ++t) {
    std::set<std::string> joined(merges[t].a.begin(), merges[t].a.end());
    joined.insert(merges[t].b.begin(), merges[t].b.end());
    std::vector<std::set<std::string>> next;
    for (auto& p : parts) {
      if (!std::includes(joined.begin(), joined.end(), p.begin(), p.end())) next.push_back(p);
    }
    next.push_back(joined);
    parts = std::move(next);
  }
  std::vector<std::vector<std::string>> out;
  for (auto& p : parts) out.emplace_back(p.begin(), p.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Random response with small counts so threshold boundaries are hit often.
inline AnnotationResponse fuzz_response(std::mt19937_64& rng, const std::vector<std::string>& countries, int i) {
  using namespace crowdcensus;
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  auto conf = [&] { return static_cast<Confidence>(1 + pick(3)); };
  AnnotationResponse r;
  r.hit_id = "H" + std::to_string(i);
  r.worker_id = "W" + std::to_string(pick(50));
  int iia = pick(10);
  r.iia = iia < 7 ? IiaAnswer::Yes : iia < 9 ? IiaAnswer::No : IiaAnswer::CannotDetermine;
  if (pick(10) < 9) {
    int g = pick(12);
    GenderAnswer cat = g < 5 ? GenderAnswer::Man : g < 9 ? GenderAnswer::Woman : g == 9 ? GenderAnswer::Nonbinary
                                                                            : g == 10 ? GenderAnswer::Unknown
                                                                                      : GenderAnswer::NotIia;
    r.gender = GenderResponse{cat, conf()};
  }
  if (pick(10) < 9) {
    EthnicityResponse e;
    int s = pick(12);
    e.status = s < 10 ? AnswerStatus::Answered : s == 10 ? AnswerStatus::CannotDetermine : AnswerStatus::NotIia;
    if (e.status == AnswerStatus::Answered) {
      std::set<int> cats;
      int first = pick(10) < 6 ? 3 : pick(7);
      cats.insert(first);
      if (pick(5) == 0) cats.insert(pick(7));
      for (int c : cats) e.categories.push_back(static_cast<Ethnicity>(c));
      if (pick(6) == 0) e.free_text = "mixed";
    }
    e.confidence = conf();
    r.ethnicity = e;
  }
  if (pick(10) < 9) {
    OriginResponse o;
    int s = pick(12);
    o.status = s < 11 ? AnswerStatus::Answered : AnswerStatus::CannotDetermine;
    if (o.status == AnswerStatus::Answered) o.country = countries[static_cast<std::size_t>(pick(static_cast<int>(countries.size())))];
    o.confidence = conf();
    r.origin = o;
  }
  if (pick(10) < 9) {
    static const char* junk[] = {"", "abc", "19", "12345", " 1850 ", "18th c"};
    std::string raw;
    int s = pick(10);
    if (s < 8) raw = std::to_string(1825 + pick(3) * 5 + pick(4));
    else if (s == 8) raw = std::to_string(1200 + pick(800));
    else raw = junk[pick(6)];
    r.birth = BirthResponse{raw, conf()};
  }
  return r;
}

}  // namespace oracle
