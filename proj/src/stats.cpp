#include "stackmf/stats.hpp"

#include "stackmf/errors.hpp"

namespace stackmf::stats {

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw DimensionError("ols: x and y differ in length");
  if (n < 2) throw ParameterError("ols needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ParameterError("ols: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  if (n > 2) fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return fit;
}

}  // namespace stackmf::stats
