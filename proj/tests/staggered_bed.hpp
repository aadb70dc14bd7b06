#pragma once

// Shared staggered-adoption test bed. Units come in groups with a common
// latent value p_g; an exact number of units per group is treated at
// target_t. Exact recovery of the propensity link requires every fit half
// to reproduce the group fractions exactly, so the bed searches
// deterministically for a seed whose per-arm shuffles balance each group
// across the halves (treated and control group counts must all be even).

#include <cstdint>
#include <vector>

#include "drlfm/panel.hpp"

namespace drlfm_test {

struct StaggeredBed {
  drlfm::DenseMatrix y;
  drlfm::DenseMatrix a;
  drlfm::StaggeredConfig cfg;
  std::vector<double> p;         // per-unit latent value
  std::vector<double> p_target;  // per-unit assignment probability at target
  bool balanced = false;
};

inline StaggeredBed make_staggered_bed(
    const std::vector<double>& group_p, const std::vector<drlfm::Index>& group_n,
    const std::vector<drlfm::Index>& group_treated, drlfm::Index t0,
    drlfm::Index target_t, drlfm::Index horizon, drlfm::StaggeredLink link,
    const std::vector<double>& p_target_group) {
  using drlfm::Index;
  Index n = 0;
  for (Index c : group_n) n += c;
  std::vector<double> p(static_cast<std::size_t>(n));
  std::vector<double> ptar(static_cast<std::size_t>(n));
  std::vector<int> treated(static_cast<std::size_t>(n), 0);
  std::vector<int> group(static_cast<std::size_t>(n), 0);
  {
    Index at = 0;
    for (std::size_t g = 0; g < group_p.size(); ++g) {
      for (Index k = 0; k < group_n[g]; ++k, ++at) {
        p[static_cast<std::size_t>(at)] = group_p[g];
        ptar[static_cast<std::size_t>(at)] = p_target_group[g];
        treated[static_cast<std::size_t>(at)] = k < group_treated[g] ? 1 : 0;
        group[static_cast<std::size_t>(at)] = static_cast<int>(g);
      }
    }
  }

  // Pre-period outcomes p_i * v_t with a unit-norm time factor, so the
  // rank-1 factor scores reproduce p exactly; post-period outcomes are
  // p_i * w_a under the realized arm.
  Eigen::VectorXd v0(t0);
  for (Index t = 0; t < t0; ++t) v0(t) = 0.3 + 0.1 * static_cast<double>(t);
  v0.normalize();
  const double w0 = 2.0, w1 = 3.0;

  Eigen::MatrixXd y(n, horizon), a(n, horizon);
  for (Index i = 0; i < n; ++i) {
    const double pi = p[static_cast<std::size_t>(i)];
    for (Index t = 0; t < horizon; ++t) {
      const bool on =
          treated[static_cast<std::size_t>(i)] == 1 && t >= target_t;
      a(i, t) = on ? 1.0 : 0.0;
      y(i, t) = t < t0 ? pi * v0(t) : pi * (on ? w1 : w0);
    }
  }

  StaggeredBed bed{drlfm::DenseMatrix(y), drlfm::DenseMatrix(a),
                   drlfm::StaggeredConfig{t0, target_t, 1, link, 1, 0.05},
                   std::move(p), std::move(ptar), false};

  for (std::uint64_t seed = 1; seed < 4000 && !bed.balanced; ++seed) {
    bed.cfg.seed = seed;
    const drlfm::StaggeredSplit split = drlfm::staggered_split(bed.a, bed.cfg);
    bool ok = true;
    for (int h = 0; h < 2 && ok; ++h) {
      std::vector<Index> tr(group_p.size(), 0), ct(group_p.size(), 0);
      for (Index i : split.by_arm_half[1][h]) {
        ++tr[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])];
      }
      for (Index i : split.by_arm_half[0][h]) {
        ++ct[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])];
      }
      for (std::size_t g = 0; g < group_p.size(); ++g) {
        if (2 * tr[g] != group_treated[g] ||
            2 * (tr[g] + ct[g]) != group_n[g]) {
          ok = false;
          break;
        }
      }
    }
    bed.balanced = ok;
  }
  return bed;
}

}  // namespace drlfm_test
