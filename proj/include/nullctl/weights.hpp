#pragma once

// Carleman weight family rho = exp(chi/(T-t)), rho_i = (T-t)^{3/2-i} rho,
// evaluated only through inverses.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace nullctl {

using Vec2 = Eigen::Vector2d;

struct Rect {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  bool contains(const Vec2& p, double tol = 0.0) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
  bool strictly_contains(const Vec2& p) const {
    return p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1;
  }
  double area() const { return (x1 - x0) * (y1 - y0); }
};

// Selects rho (base) or rho_0, rho_1, rho_2.
enum class Weight { base, rho0, rho1, rho2 };

struct ChiValues {
  double chi = 0;
  Vec2 grad = Vec2::Zero();
  double lap = 0;
};

struct HattedCoeffs {
  double c_mass = 0;
  Vec2 c_grad = Vec2::Zero();
  double c_time = 0;
};

// Exponents below this are treated as exact underflow.
inline constexpr double kExpFloor = -700.0;

inline double clamped_exp(double e) { return e < kExpFloor ? 0.0 : std::exp(e); }

// c_mass, c_grad, c_time of the hatted constraint form from chi data and
// the time-to-go T - t.
inline HattedCoeffs hatted_coeffs(const ChiValues& c, double time_to_go) {
  if (!(time_to_go > 0))
    throw std::domain_error("hatted_coeffs: t must be strictly less than T");
  double sq = std::sqrt(time_to_go);
  HattedCoeffs h;
  h.c_time = time_to_go * sq;
  h.c_grad = 2.0 * sq * c.grad;
  h.c_mass = sq * (-1.5 + c.lap) + (c.chi + c.grad.squaredNorm()) / sq;
  return h;
}

class WeightSet {
 public:
  WeightSet(double L1, double L2, double T, Vec2 anchor, double K1, double K2, Rect omega)
      : L1_(L1), L2_(L2), T_(T), anchor_(anchor), K1_(K1), K2_(K2), omega_(omega) {
    if (!(L1 > 0) || !(L2 > 0)) throw std::invalid_argument("weights: domain sides must be positive");
    if (!(T > 0)) throw std::invalid_argument("weights: T must be positive");
    if (!(K1 > 0)) throw std::invalid_argument("weights: K1 must be positive");
    if (!(K2 > 0)) throw std::invalid_argument("weights: K2 must be positive");
    Rect dom{0, L1, 0, L2};
    if (!dom.strictly_contains(anchor))
      throw std::invalid_argument("weights: anchor must lie strictly inside the domain");
    if (!omega.contains(anchor))
      throw std::invalid_argument("weights: anchor must lie in the control region");
    double a = anchor.x(), b = anchor.y();
    ca_ = a - (L1 - 2 * a) / (2 * a * (L1 - a));
    cb_ = b - (L2 - 2 * b) / (2 * b * (L2 - b));
    double da = a - ca_, db = b - cb_;
    inv_denom_ = 1.0 / (a * (L1 - a) * b * (L2 - b) * std::exp(-(da * da + db * db)));
  }

  double L1() const { return L1_; }
  double L2() const { return L2_; }
  double T() const { return T_; }
  double K1() const { return K1_; }
  double K2() const { return K2_; }
  const Vec2& anchor() const { return anchor_; }
  const Rect& omega() const { return omega_; }
  double ca() const { return ca_; }
  double cb() const { return cb_; }

  double chi0(const Vec2& x) const {
    Factor f1 = factor(x.x(), L1_, ca_), f2 = factor(x.y(), L2_, cb_);
    return inv_denom_ * f1.h * f2.h;
  }

  // Gradient and Laplacian of chi0.
  std::pair<Vec2, double> chi0_derivs(const Vec2& x) const {
    Factor f1 = factor(x.x(), L1_, ca_), f2 = factor(x.y(), L2_, cb_);
    Vec2 g(inv_denom_ * f1.dh * f2.h, inv_denom_ * f1.h * f2.dh);
    double lap = inv_denom_ * (f1.d2h * f2.h + f1.h * f2.d2h);
    return {g, lap};
  }

  ChiValues chi(const Vec2& x) const {
    double c0 = chi0(x);
    auto [g0, lap0] = chi0_derivs(x);
    double e = std::exp(c0);
    ChiValues r;
    r.chi = K1_ * (std::exp(K2_) - e);
    r.grad = -K1_ * e * g0;
    r.lap = -K1_ * e * (lap0 + g0.squaredNorm());
    return r;
  }

  // Inverse weight from a precomputed chi value; returns the t -> T limit 0 at t >= T.
  double inv_weight(Weight w, double chi_value, double t) const {
    double s = T_ - t;
    if (!(s > 0)) return 0.0;
    double e = -chi_value / s;
    switch (w) {
      case Weight::base: break;
      case Weight::rho0: e -= 1.5 * std::log(s); break;
      case Weight::rho1: e -= 0.5 * std::log(s); break;
      case Weight::rho2: e += 0.5 * std::log(s); break;
    }
    return clamped_exp(e);
  }

  double inv_weight(Weight w, const Vec2& x, double t) const { return inv_weight(w, chi(x).chi, t); }

  HattedCoeffs hatted(const Vec2& x, double t) const { return hatted_coeffs(chi(x), T_ - t); }

  // rho_0(x, 0) = T^{3/2} exp(chi/T); the one non-inverted evaluation.
  double rho0_initial(double chi_value) const {
    double v = std::pow(T_, 1.5) * std::exp(chi_value / T_);
    if (!std::isfinite(v)) throw std::range_error("weights: rho_0(x,0) overflows");
    return v;
  }

 private:
  // h = s(L-s) exp(-(s-c)^2) and its first two derivatives.
  struct Factor {
    double h, dh, d2h;
  };
  static Factor factor(double s, double L, double c) {
    double f = s * (L - s), df = L - 2 * s;
    double d = s - c;
    double g = std::exp(-d * d);
    double dg = -2 * d * g, d2g = (4 * d * d - 2) * g;
    return {f * g, df * g + f * dg, -2 * g + 2 * df * dg + f * d2g};
  }

  double L1_, L2_, T_;
  Vec2 anchor_;
  double K1_, K2_;
  Rect omega_;
  double ca_ = 0, cb_ = 0, inv_denom_ = 1;
};

}  // namespace nullctl
