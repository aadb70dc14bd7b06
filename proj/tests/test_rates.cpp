// Monte-Carlo check that the nuisance estimation errors decay at the
// root-n rate: medians of the normalized (1,2)-norm errors over 50 seeds
// must decrease across N = M in {200, 400, 800}, and the 200-to-800 ratio
// must sit near the ideal factor of 2.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "drlfm/cfsvd.hpp"
#include "drlfm/dgp.hpp"

using namespace drlfm;

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
  }
  return hi;
}

double one_two_error(const DenseMatrix& est, const DenseMatrix& truth) {
  const DenseMatrix diff(est.eigen() - truth.eigen());
  return norm(diff, NormKind::one_two) /
         std::sqrt(static_cast<double>(truth.rows()));
}

}  // namespace

int main() {
  const int seeds = 50;
  const std::vector<Index> sizes{200, 400, 800};
  std::vector<double> med_p, med_theta;

  for (Index n : sizes) {
    std::vector<double> err_p, err_theta;
    for (int seed = 0; seed < seeds; ++seed) {
      SimConfig cfg;
      cfg.n = cfg.m = n;
      cfg.r_p = cfg.r_theta = 1;
      cfg.seed = 1000 + static_cast<std::uint64_t>(seed);
      Rng gt_rng(cfg.seed, 1ULL << 63);
      const auto draw = generate_ground_truth(cfg, gt_rng);
      Rng rep_rng(cfg.seed, 0);
      auto [y, a] = sample_realization(draw.gt, rep_rng);
      const auto est = cfsvd(y, a, default_partition(n, n),
                             CfsvdConfig::from_model_ranks(1, 1, 1, 0.05));
      err_p.push_back(one_two_error(est.p_hat, draw.gt.p));
      err_theta.push_back(one_two_error(est.theta0_hat, draw.gt.theta0) +
                          one_two_error(est.theta1_hat, draw.gt.theta1));
    }
    med_p.push_back(median(err_p));
    med_theta.push_back(median(err_theta));
    std::printf("N=%4ld  median E(P)=%.5f  median E(Theta)=%.5f\n",
                static_cast<long>(n), med_p.back(), med_theta.back());
  }

  bool pass = true;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    if (!(med_p[k] < med_p[k - 1])) pass = false;
    if (!(med_theta[k] < med_theta[k - 1])) pass = false;
  }
  const double ratio_p = med_p.front() / med_p.back();
  const double ratio_theta = med_theta.front() / med_theta.back();
  std::printf("ratio E(P) 200/800 = %.3f, E(Theta) 200/800 = %.3f\n", ratio_p,
              ratio_theta);
  if (!(ratio_p >= 1.4 && ratio_p <= 3.0)) pass = false;
  if (!(ratio_theta >= 1.4 && ratio_theta <= 3.0)) pass = false;
  std::printf("%s rate decay of the cross-fitted nuisance errors\n",
              pass ? "[PASS]" : "[FAIL]");
  return pass ? 0 : 1;
}
