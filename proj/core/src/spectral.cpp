#include "ibr/spectral.hpp"

#include "ibr/error.hpp"

#include <random>

namespace ibr {

namespace {

constexpr std::int64_t kMaxTriples = 1'000'000;

double pair_kernel(const Dataset& data, KernelFamily family, const Bandwidth& h, Eigen::Index a,
                   Eigen::Index b) {
  return kernel_eval(family, weighted_distance(data.X().row(a).transpose(),
                                               data.X().row(b).transpose(), h));
}

bool candidate(const Eigen::MatrixXd& dist, KernelFamily family, Eigen::Index i1, Eigen::Index i2,
               Eigen::Index i3) {
  const double d12 = dist(i1, i2);
  const double d23 = dist(i2, i3);
  const double d13 = dist(i1, i3);
  if (family == KernelFamily::uniform) return d12 < 1.0 && d23 < 1.0 && d13 > 1.0;
  return d12 < 1.0 && d23 < 1.0 && d13 < 1.0 && d13 > std::min(d12, d23);
}

}  // namespace

std::string_view to_string(Verdict v) {
  return v == Verdict::certified_nonneg ? "certified-nonneg" : "negative-found";
}

SpectrumReport spectrum_report(const KernelSmoother& sm) {
  SpectrumReport r;
  r.family = sm.family;
  r.n = sm.n();
  r.min_eig = sm.spectrum.values.minCoeff();
  r.max_eig = sm.spectrum.values.maxCoeff();
  r.verdict = r.min_eig < -kSpectrumTol ? Verdict::negative_found : Verdict::certified_nonneg;
  return r;
}

double minor3_det(const Dataset& data, KernelFamily family, const Bandwidth& h,
                  const IndexTriple& idx) {
  const auto [i1, i2, i3] = idx;
  for (auto i : idx) {
    if (i < 0 || i >= data.n()) throw InputError("minor3_det: index out of range");
  }
  if (i1 == i2 || i2 == i3 || i1 == i3) throw InputError("minor3_det: indices must be distinct");
  const double k0 = kernel_at_zero(family);
  const double k21 = pair_kernel(data, family, h, i2, i1);
  const double k32 = pair_kernel(data, family, h, i3, i2);
  const double k31 = pair_kernel(data, family, h, i3, i1);
  return k0 * (k0 * k0 - k32 * k32) - k21 * (k0 * k21 - k32 * k31) + k31 * (k21 * k32 - k0 * k31);
}

std::optional<IndexTriple> find_negative_triple(const Dataset& data, KernelFamily family,
                                                const Bandwidth& h) {
  if (family != KernelFamily::uniform && family != KernelFamily::epanechnikov) {
    throw InputError("find_negative_triple: only defined for the uniform and epanechnikov kernels");
  }
  if (h.size() != data.d()) throw InputError("find_negative_triple: bandwidth length differs from d");
  const Eigen::Index n = data.n();
  if (n < 3) return std::nullopt;

  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist(i, j) = dist(j, i) =
          weighted_distance(data.X().row(i).transpose(), data.X().row(j).transpose(), h);
    }
  }
  auto accept = [&](Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) {
    return candidate(dist, family, i1, i2, i3) && minor3_det(data, family, h, {i1, i2, i3}) < 0.0;
  };

  // i1 < i3, i2 distinct from both: n (n-1) (n-2) / 2 ordered candidates.
  const double total = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) *
                       static_cast<double>(n - 2);
  if (total <= static_cast<double>(kMaxTriples)) {
    for (Eigen::Index i1 = 0; i1 < n; ++i1) {
      for (Eigen::Index i2 = 0; i2 < n; ++i2) {
        if (i2 == i1) continue;
        for (Eigen::Index i3 = i1 + 1; i3 < n; ++i3) {
          if (i3 == i2) continue;
          if (accept(i1, i2, i3)) return IndexTriple{i1, i2, i3};
        }
      }
    }
    return std::nullopt;
  }

  std::mt19937_64 rng(0x1b5eed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::optional<IndexTriple> best;
  for (std::int64_t s = 0; s < kMaxTriples; ++s) {
    Eigen::Index i1 = pick(rng);
    const Eigen::Index i2 = pick(rng);
    Eigen::Index i3 = pick(rng);
    if (i1 == i2 || i2 == i3 || i1 == i3) continue;
    if (i1 > i3) std::swap(i1, i3);
    const IndexTriple t{i1, i2, i3};
    if ((!best || t < *best) && accept(i1, i2, i3)) best = t;
  }
  return best;
}

SpectrumReport diagnose(const Dataset& data, KernelFamily family, const Bandwidth& h) {
  SpectrumReport r = spectrum_report(build_kernel_smoother(data, family, h));
  if (family == KernelFamily::uniform || family == KernelFamily::epanechnikov) {
    if (auto t = find_negative_triple(data, family, h)) {
      r.witness = MinorWitness{*t, minor3_det(data, family, h, *t)};
      r.verdict = Verdict::negative_found;
    }
  }
  return r;
}

}  // namespace ibr
