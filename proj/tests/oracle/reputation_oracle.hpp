#pragma once

// Direct transcription of the three reputation formulas in 50-digit decimal
// arithmetic. Independent of src/reputation.cpp: shares no code with it.

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <vector>

namespace oracle {

using Big = boost::multiprecision::cpp_dec_float_50;

struct OracleVote {
  double ir;
  double v;
};

inline Big clamp1(const Big& x) {
  if (x > 1) return Big(1);
  if (x < -1) return Big(-1);
  return x;
}

inline Big fade(double base, double dt) {
  if (dt == 0.0) return Big(1);
  if (base == 0.0) return Big(0);
  return boost::multiprecision::pow(Big(base), Big(dt));
}

inline double own_experience(double oe_old, double st, double rho, double dt) {
  const Big f = fade(rho, dt);
  return static_cast<double>(Big(oe_old) * f + Big(st) * (Big(1) - f));
}

inline double service_reputation(double oe, const std::vector<OracleVote>& votes, double alpha) {
  Big num = 0, den = 0;
  for (const auto& v : votes) {
    if (!(v.ir > 0.0)) continue;
    num += Big(v.ir) * Big(v.v);
    den += Big(v.ir);
  }
  if (den == 0) return oe;
  return static_cast<double>(clamp1(Big(alpha) * Big(oe) + (Big(1) - Big(alpha)) * (num / den)));
}

inline double information_reputation(double oe, const std::vector<OracleVote>& votes, double beta,
                                     double gamma, double dt) {
  Big num = 0, den = 0;
  for (const auto& v : votes) {
    if (!(v.ir > 0.0)) continue;
    num += Big(v.ir) * (Big(v.v) - Big(oe));
    den += Big(v.ir);
  }
  if (den == 0) return static_cast<double>(clamp1(Big(beta) * Big(oe)));
  return static_cast<double>(
      clamp1(Big(beta) * Big(oe) + fade(gamma, dt) * (Big(1) - Big(beta)) * (num / den)));
}

}  // namespace oracle
