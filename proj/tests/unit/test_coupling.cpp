#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stackmf/coupling.hpp"
#include "stackmf/errors.hpp"

using namespace stackmf;
using namespace stackmf::coupling;
using measures::DiscreteMeasure;

namespace {

std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) s += (x = e(gen));
  for (double& x : p) x /= s;
  return p;
}

void check_marginals(const MixtureCoupling& c, double tol) {
  const std::size_t n = c.size();
  for (std::size_t h = 0; h < n; ++h) {
    double row = 0.0, col = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      row += c.at(h, l);
      col += c.at(l, h);
      CHECK(c.at(h, l) >= 0.0);
    }
    CHECK(std::abs(row - c.p[h]) <= tol);
    CHECK(std::abs(col - c.q[h]) <= tol);
  }
}

}  // namespace

TEST_CASE("build_pihat examples") {
  const auto same = build_pihat(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5});
  CHECK(same.pihat == std::vector<double>{0.5, 0.0, 0.0, 0.5});

  const auto two = build_pihat(std::vector<double>{0.7, 0.3}, std::vector<double>{0.4, 0.6});
  CHECK(two.at(0, 0) == doctest::Approx(0.4));
  CHECK(two.at(0, 1) == doctest::Approx(0.3));
  CHECK(two.at(1, 0) == 0.0);
  CHECK(two.at(1, 1) == doctest::Approx(0.3));

  const auto three =
      build_pihat(std::vector<double>{0.5, 0.3, 0.2}, std::vector<double>{0.2, 0.5, 0.3});
  const std::vector<double> expected{0.2, 0.2, 0.1, 0.0, 0.3, 0.0, 0.0, 0.0, 0.2};
  for (std::size_t k = 0; k < 9; ++k) CHECK(three.pihat[k] == doctest::Approx(expected[k]));
  check_marginals(three, 1e-15);
}

TEST_CASE("build_pihat validation") {
  CHECK_THROWS_AS(build_pihat(std::vector<double>{0.5, 0.6}, std::vector<double>{0.5, 0.5}),
                  ValidationError);
  CHECK_THROWS_AS(build_pihat(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}),
                  DimensionError);
}

TEST_CASE("build_pihat marginals and diagonal mass on random inputs") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + gen() % 10;
    auto p = random_simplex(gen, n);
    auto q = random_simplex(gen, n);
    if (trial % 7 == 0) q[0] = p[0];  // exercise ties
    double s = 0.0;
    for (double x : q) s += x;
    for (double& x : q) x /= s;
    const auto c = build_pihat(p, q);
    check_marginals(c, 1e-12);
    double diag = 0.0;
    for (std::size_t h = 0; h < n; ++h) {
      CHECK(c.at(h, h) == std::min(p[h], q[h]));
      diag += c.at(h, h);
    }
    CHECK(std::abs(diag - (1.0 - tv_half(p, q))) <= 1e-12);
  }
}

TEST_CASE("mixture_w2_upper_bound") {
  const auto c = build_pihat(std::vector<double>{0.7, 0.3}, std::vector<double>{0.4, 0.6});
  CHECK(mixture_w2_upper_bound(c, std::vector<double>{0, 4, 4, 0}) == doctest::Approx(1.2));
  const auto same = build_pihat(std::vector<double>{0.7, 0.3}, std::vector<double>{0.7, 0.3});
  CHECK(mixture_w2_upper_bound(same, std::vector<double>{0, 4, 4, 0}) == 0.0);
  CHECK_THROWS_AS(mixture_w2_upper_bound(c, std::vector<double>{0, 4, 3, 0}), ValidationError);
  CHECK_THROWS_AS(mixture_w2_upper_bound(c, std::vector<double>{0, -1, -1, 0}), ValidationError);
}

TEST_CASE("bound dominates the exact distance and is symmetric") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 5, dim = 1 + gen() % 2;
    std::vector<double> x(n * dim);
    for (double& v : x) v = z(gen);
    const auto p = random_simplex(gen, n);
    const auto q = random_simplex(gen, n);
    std::vector<double> d(n * n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t k = 0; k < dim; ++k) {
          d[h * n + l] += (x[h * dim + k] - x[l * dim + k]) * (x[h * dim + k] - x[l * dim + k]);
        }
      }
    }
    // Make d exactly symmetric.
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t l = 0; l < h; ++l) d[h * n + l] = d[l * n + h];
    }
    const DiscreteMeasure mp(dim, x, p), mq(dim, x, q);
    const double exact = measures::w2_exact_lp(mp, mq).second.cost();
    const double bound = mixture_w2_upper_bound(build_pihat(p, q), d);
    CHECK(exact <= bound + 1e-9);
    CHECK(bound == doctest::Approx(mixture_w2_upper_bound(build_pihat(q, p), d)).epsilon(1e-12));
  }
}

TEST_CASE("verify_mixture_convexity") {
  const std::vector<DiscreteMeasure> mus{DiscreteMeasure::dirac(std::vector<double>{0.0}),
                                         DiscreteMeasure::dirac(std::vector<double>{0.0})};
  const std::vector<DiscreteMeasure> nus{DiscreteMeasure::dirac(std::vector<double>{1.0}),
                                         DiscreteMeasure::dirac(std::vector<double>{3.0})};
  const auto r = verify_mixture_convexity(mus, nus, std::vector<double>{0.5, 0.5});
  CHECK(r.lhs == doctest::Approx(5.0));
  CHECK(r.rhs == doctest::Approx(5.0));
  const auto same = verify_mixture_convexity(mus, mus, std::vector<double>{0.5, 0.5});
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);
}

TEST_CASE("tv_half") {
  CHECK(tv_half(std::vector<double>{0.2, 0.8}, std::vector<double>{0.2, 0.8}) == 0.0);
  CHECK(tv_half(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) == 1.0);
  CHECK(tv_half(std::vector<double>{0.7, 0.3}, std::vector<double>{0.4, 0.6}) ==
        doctest::Approx(0.3));
}

TEST_CASE("conditioning on independent extra information leaves the law unchanged") {
  // u = 3 * u1 + u2 with digits u1 in {0,1,2}, u2 in {0,1,2}; v in {0..3}.
  const std::size_t nu = 9, nv = 4, nx = 5;
  std::vector<std::size_t> phi(nu * nv), phi_leaky(nu * nv), coarse(nu), fine(nu);
  for (std::size_t u = 0; u < nu; ++u) {
    coarse[u] = u / 3;
    fine[u] = u;
    for (std::size_t v = 0; v < nv; ++v) {
      phi[u * nv + v] = (u / 3 + v) % nx;
      phi_leaky[u * nv + v] = (u / 3 + v + u % 3) % nx;
    }
  }
  CHECK(same_conditional_laws(conditional_law_given_labels(nu, nv, nx, phi, coarse),
                              conditional_law_given_labels(nu, nv, nx, phi, fine)));
  // X reading the extra digit is a negative control.
  CHECK_FALSE(same_conditional_laws(conditional_law_given_labels(nu, nv, nx, phi_leaky, coarse),
                                    conditional_law_given_labels(nu, nv, nx, phi_leaky, fine)));
}
