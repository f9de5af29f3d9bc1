#pragma once

// Quartets (l, m, n, k) with l + m = n + k on integer mode grids: interaction
// classes, resonance tests in exact integer arithmetic, and counting.

#include <kzpsd/error.hpp>
#include <kzpsd/parallel.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

namespace kzpsd::quartets {

struct Quartet {
  long l = 0;
  long m = 0;
  long n = 0;
  long k = 0;

  bool frequency_matched() const noexcept { return l + m == n + k; }
  friend bool operator==(const Quartet&, const Quartet&) = default;
};

enum class QuartetClass { Spm, Xpm, DegenerateFwmLm, DegenerateFwmNk, NonDegenerateFwm };

inline const char* to_string(QuartetClass c) {
  switch (c) {
    case QuartetClass::Spm: return "SPM";
    case QuartetClass::Xpm: return "XPM";
    case QuartetClass::DegenerateFwmLm: return "DEGENERATE_FWM_LM";
    case QuartetClass::DegenerateFwmNk: return "DEGENERATE_FWM_NK";
    case QuartetClass::NonDegenerateFwm: return "NON_DEGENERATE_FWM";
  }
  return "?";
}

struct Classification {
  QuartetClass kind;
  /// Number of ordered (l, m) pairs giving the same product q_l q_m: 1 if
  /// l == m, else 2.
  int multiplicity;
};

/// True iff {l = n, m = k} or {l = k, m = n}.
inline bool is_trivial(const Quartet& q) {
  require(q.frequency_matched(), "is_trivial: quartet violates l + m = n + k");
  return (q.l == q.n && q.m == q.k) || (q.l == q.k && q.m == q.n);
}

inline Classification classify(const Quartet& q) {
  require(q.frequency_matched(), "classify: quartet violates l + m = n + k");
  const int multiplicity = q.l == q.m ? 1 : 2;
  if (q.l == q.m && q.m == q.n && q.n == q.k) return {QuartetClass::Spm, multiplicity};
  if (is_trivial(q)) return {QuartetClass::Xpm, multiplicity};
  if (q.l == q.m) return {QuartetClass::DegenerateFwmLm, multiplicity};
  if (q.n == q.k) return {QuartetClass::DegenerateFwmNk, multiplicity};
  return {QuartetClass::NonDegenerateFwm, multiplicity};
}

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("integer overflow in dispersion relation");
  return r;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError("integer overflow in dispersion relation");
  return r;
}

}  // namespace detail

/// Integer polynomial zeta(k) = sum_i coeffs[i] k^i, evaluated exactly.
class DispersionRelation {
public:
  explicit DispersionRelation(std::vector<std::int64_t> coeffs) : coeffs_(std::move(coeffs)) {}

  static DispersionRelation quadratic() { return DispersionRelation({0, 0, 1}); }
  static DispersionRelation none() { return DispersionRelation({}); }

  const std::vector<std::int64_t>& coeffs() const noexcept { return coeffs_; }

  std::int64_t operator()(std::int64_t k) const {
    std::int64_t acc = 0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it)
      acc = detail::checked_add(detail::checked_mul(acc, k), *it);
    return acc;
  }

  bool resonant(const Quartet& q) const {
    using detail::checked_add;
    return checked_add((*this)(q.l), (*this)(q.m)) == checked_add((*this)(q.n), (*this)(q.k));
  }

private:
  std::vector<std::int64_t> coeffs_;
};

/// All quartets in the box |l|,|m|,|n|,|k| <= K that satisfy both
/// l + m = n + k and zeta(l) + zeta(m) = zeta(n) + zeta(k), ordered by
/// (l, m, n).
inline std::vector<Quartet> enumerate_resonant(const DispersionRelation& zeta, long box) {
  require(box >= 1, "enumerate_resonant: box must be >= 1");
  require(box <= (1L << 20), "enumerate_resonant: box too large");
  const std::size_t width = static_cast<std::size_t>(2 * box + 1);
  std::vector<std::int64_t> values(width);
  for (long i = -box; i <= box; ++i) values[static_cast<std::size_t>(i + box)] = zeta(i);
  auto value = [&](long i) { return values[static_cast<std::size_t>(i + box)]; };

  std::vector<std::vector<Quartet>> rows(width);
  parallel_for(width, [&](std::size_t row) {
    const long l = static_cast<long>(row) - box;
    for (long m = -box; m <= box; ++m) {
      const std::int64_t lhs = detail::checked_add(value(l), value(m));
      for (long n = -box; n <= box; ++n) {
        const long k = l + m - n;
        if (k < -box || k > box) continue;
        if (lhs == detail::checked_add(value(n), value(k))) rows[row].push_back({l, m, n, k});
      }
    }
  });
  std::vector<Quartet> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

struct Triple {
  long l;
  long m;
  long n;
  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Calls fn(l, m, n) for every (l, m, n) with |l|,|m|,|n| <= N,
/// l + m = n + k, l != k and m != k, ordered by (l, m).
template <typename Fn>
void for_each_nr(long k, long N, Fn&& fn) {
  require(N >= 0 && std::labs(k) <= N, "nr_set: need |k| <= N");
  for (long l = -N; l <= N; ++l) {
    if (l == k) continue;
    const long lo = std::max(-N, -N - l + k);
    const long hi = std::min(N, N - l + k);
    for (long m = lo; m <= hi; ++m) {
      if (m == k) continue;
      fn(l, m, l + m - k);
    }
  }
}

/// The non-trivial index set nr_k on the box [-N, N], materialized.
inline std::vector<Triple> nr_set(long k, long N) {
  std::vector<Triple> out;
  for_each_nr(k, N, [&](long l, long m, long n) { out.push_back({l, m, n}); });
  return out;
}

/// Interference terms acting on mode k of a band [-N, N]: the cross-phase
/// part 2 P q_k counted as 2 (2N + 1) terms, plus one term per triple of nr_k.
/// At k = 0 this equals 3N^2 + 3N + 2.
inline std::int64_t count_interference_terms(long N, long k) {
  require(N >= 0, "count_interference_terms: N must be >= 0");
  require(std::labs(k) <= N, "count_interference_terms: need |k| <= N");
  std::int64_t count = 2 * (2 * static_cast<std::int64_t>(N) + 1);
  for (long l = -N; l <= N; ++l) {
    if (l == k) continue;
    const long lo = std::max(-N, -N - l + k);
    const long hi = std::min(N, N - l + k);
    if (hi < lo) continue;
    count += hi - lo + 1;
    if (k >= lo && k <= hi) --count;
  }
  return count;
}

/// CSV with columns l,m,n,k,class,resonant.
inline void write_quartets_csv(std::ostream& os, const std::vector<Quartet>& quartets,
                               const DispersionRelation& zeta) {
  os << "l,m,n,k,class,resonant\n";
  for (const Quartet& q : quartets) {
    os << q.l << ',' << q.m << ',' << q.n << ',' << q.k << ',' << to_string(classify(q).kind) << ','
       << (zeta.resonant(q) ? 1 : 0) << '\n';
  }
}

}  // namespace kzpsd::quartets
