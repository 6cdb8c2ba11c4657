#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace fkp {

// Potts / random-cluster parameters on the d-regular tree with derived weights.
struct ModelParams {
  int d = 3;
  double q = 3.0;
  double beta = 0.0;
  double B = 0.0;
  double w = 0.0;         // e^beta - 1
  double w_ghost = 0.0;   // e^B - 1
  double p_edge = 0.0;    // 1 - e^-beta
  double p_ghost = 0.0;   // 1 - e^-B

  bool potts_integer() const;
  int q_int() const;  // throws UnsupportedSpinSpace for non-integer q
};

// Validates ranges (d >= 3, q > 2, beta >= 0, B >= 0) and fills derived fields.
ModelParams make_params(int d, double q, double beta, double B);

// Probability vector on [q]; index 0 is colour 1 (the field colour).
struct ColorLaw {
  std::vector<double> probs;
  std::optional<std::pair<double, double>> reduced;

  static ColorLaw uniform(int q);
  static ColorLaw delta_one(int q);
  // (a, (1-a)/(q-1), ..., (1-a)/(q-1)) with the reduced form attached.
  static ColorLaw from_reduced(double a, int q);
  // Normalises and attaches the reduced form when colours 2..q agree exactly.
  static ColorLaw from_weights(std::vector<double> weights);

  int q() const { return static_cast<int>(probs.size()); }
  double operator[](int i) const { return probs[i]; }
  void validate(double tol = 1e-12) const;
};

double sup_distance(const ColorLaw& a, const ColorLaw& b);

}  // namespace fkp
