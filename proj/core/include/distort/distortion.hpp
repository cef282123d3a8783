#pragma once

#include <memory>
#include <string_view>
#include <variant>
#include <vector>

namespace distort {

// A probability carried together with its complement so that values near 1
// keep their precision. Invariant: p + comp == 1 up to rounding.
struct Prob {
  double p = 0.0;
  double comp = 1.0;

  static constexpr Prob of(double v) { return {v, 1.0 - v}; }
  static constexpr Prob of_complement(double c) { return {1.0 - c, c}; }
  constexpr double smaller() const { return p < comp ? p : comp; }
};

// a - b, using complements when both are close to 1.
inline double prob_diff(Prob a, Prob b) {
  return (a.p > 0.5 && b.p > 0.5) ? b.comp - a.comp : a.p - b.p;
}

struct Derivatives {
  double dp = 1.0;
  double dpp = 0.0;
  double dppp = 0.0;
  double dt = 0.0;
  double dtp = 0.0;
  bool clamped = false;
};

// Smallest distance from {0,1} used for derivative evaluation.
inline constexpr double kDerivativeClamp = 1e-300;

// w(t) for the separable family, required to stay in [0,1] on [0, horizon].
struct TimeWeight {
  enum class Kind { Constant, Linear, Exponential };
  Kind kind = Kind::Constant;
  // constant: a; linear: a + b t; exponential: b + (a - b) exp(-k t)
  double a = 1.0;
  double b = 0.0;
  double k = 0.0;

  double value(double t) const;
  double slope(double t) const;
  bool operator==(const TimeWeight&) const = default;
};

class DistortionSpec {
 public:
  struct Identity {
    bool operator==(const Identity&) const = default;
  };
  struct Power {
    double gamma;
    bool operator==(const Power&) const = default;
  };
  struct KahnemanTversky {
    double gamma;
    bool operator==(const KahnemanTversky&) const = default;
  };
  struct TverskyFox {
    double alpha, gamma;
    bool operator==(const TverskyFox&) const = default;
  };
  struct Prelec {
    double gamma, alpha;
    bool operator==(const Prelec&) const = default;
  };
  struct Wang {
    double alpha;
    bool operator==(const Wang&) const = default;
  };
  // phi(t,p) = p + w(t) (base(p) - p)
  struct Separable {
    TimeWeight weight;
    std::shared_ptr<const DistortionSpec> base;
    double horizon;
    bool operator==(const Separable& o) const {
      return weight == o.weight && horizon == o.horizon && *base == *o.base;
    }
  };
  using Family = std::variant<Identity, Power, KahnemanTversky, TverskyFox, Prelec, Wang, Separable>;

  static constexpr double kKahnemanTverskyFloor = 0.28;

  DistortionSpec() = default;

  static DistortionSpec identity();
  static DistortionSpec power(double gamma);
  static DistortionSpec kahneman_tversky(double gamma);
  static DistortionSpec tversky_fox(double alpha, double gamma);
  static DistortionSpec prelec(double gamma, double alpha);
  static DistortionSpec wang(double alpha);
  static DistortionSpec separable(TimeWeight weight, const DistortionSpec& base, double horizon);

  const Family& family() const { return family_; }
  std::string_view name() const;
  bool time_invariant() const;
  bool is_identity() const { return std::holds_alternative<Identity>(family_); }

  double eval(double t, double p) const;
  // 1 - phi(t, 1 - c), accurate for small c.
  double eval_complement(double t, double c) const;
  Prob eval(double t, Prob p) const;

  Derivatives derivatives(double t, double p) const;
  Derivatives derivatives(double t, Prob p) const;

  bool operator==(const DistortionSpec& o) const { return family_ == o.family_; }

 private:
  explicit DistortionSpec(Family f) : family_(std::move(f)) {}
  Family family_{Identity{}};
};

struct ValidationReport {
  double max_pp_ratio = 0.0;   // |phi_pp / phi_p| p(1-p)
  double max_ppp_ratio = 0.0;  // |phi_ppp / phi_p| p^2 (1-p)^2
  double max_t_ratio = 0.0;    // |phi_t / phi_p| / (p(1-p))
  double max_tp_ratio = 0.0;   // |phi_tp / phi_p|
  bool monotone = true;
  bool endpoints = true;
  bool positive_slope = true;
  double bound = 1.0;
  bool pass = false;
};

ValidationReport validate_distortion(const DistortionSpec& d, const std::vector<double>& t_grid,
                                     const std::vector<double>& p_grid, double bound = 1.0);

}  // namespace distort
