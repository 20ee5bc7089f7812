#pragma once

#include "ibr/dataset.hpp"
#include "ibr/kernel.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace ibr {

// Eigenvalue sign decisions.
inline constexpr double kSpectrumTol = 1e-8;

enum class Verdict { certified_nonneg, negative_found };

std::string_view to_string(Verdict v);

using IndexTriple = std::array<Eigen::Index, 3>;

struct MinorWitness {
  IndexTriple idx{};
  double det = 0.0;
};

struct SpectrumReport {
  KernelFamily family = KernelFamily::gaussian;
  Eigen::Index n = 0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  Verdict verdict = Verdict::certified_nonneg;
  std::optional<MinorWitness> witness;
};

// Eigenvalue range of A = D^{1/2} K D^{1/2} with a sign verdict at kSpectrumTol.
SpectrumReport spectrum_report(const KernelSmoother& sm);

/// Determinant of the 3x3 principal submatrix of the Gram matrix at rows and
/// columns (i1, i2, i3), expanded along the first row:
///   K0 (K0^2 - K32^2) - K21 (K0 K21 - K32 K31) + K31 (K21 K32 - K0 K31)
/// where Kab = K(d_h(X_ia, X_ib)) and K0 = K(0).
double minor3_det(const Dataset& data, KernelFamily family, const Bandwidth& h,
                  const IndexTriple& idx);

/// First triple (i1, i2, i3), in lexicographic order, satisfying the
/// configuration that forces a negative 3x3 minor and whose minor is in fact
/// negative. i2 is the shared neighbour and i1 < i3.
///   uniform:       d(i1,i2) < 1, d(i2,i3) < 1, d(i1,i3) > 1
///   epanechnikov:  all pairwise distances < 1, d(i1,i3) > min(d(i1,i2), d(i2,i3))
/// Designs with more than 1e6 candidate triples are sampled (fixed seed) instead
/// of scanned. Throws InputError for positive-definite families.
std::optional<IndexTriple> find_negative_triple(const Dataset& data, KernelFamily family,
                                                const Bandwidth& h);

// spectrum_report plus, for uniform/epanechnikov, the witness search.
SpectrumReport diagnose(const Dataset& data, KernelFamily family, const Bandwidth& h);

}  // namespace ibr
