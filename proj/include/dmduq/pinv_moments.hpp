#pragma once

// Exact first and second moments of the elements of the snapshot
// pseudoinverse X^+ = X^T (X X^T)^{-1} under Gaussian measurement noise.
//
// Element (t, k) of X^+ is, by the Sherman-Morrison downdate of X X^T,
//
//     x+_{tk} = s1 / s2,   s1 = e_k^T R x_t,   s2 = 1 + x_t^T R x_t,
//
// with R = V^{-1} and V = sum_{l != t} x_l x_l^T. Conditioning on R (built
// from the recorded snapshot means) and taking x_t ~ N(mu, Sigma), the joint
// moment generating function h(p1, -p2) = E[exp(p1 s1 - p2 s2)] is Gaussian
// in closed form, and the ratio moments follow from
//
//     E[(s1/s2)^eta] = 1/(eta-1)! int_0^inf p2^{eta-1} d^eta h/dp1^eta |_{p1=0} dp2.
//
// Writing W(p2) = V + 2 p2 Sigma, the p1-derivatives at p1 = 0 reduce to
//
//     dh/dp1     = e^{-p2} sqrt(|V| / |W|) exp(-p2 mu^T W^{-1} mu) g1,
//     d2h/dp1^2  = e^{-p2} sqrt(|V| / |W|) exp(-p2 mu^T W^{-1} mu) g2,
//     g1 = e_k^T W^{-1} mu,     g2 = e_k^T W^{-1} Sigma R e_k + g1^2,
//
// which is algebraically the same integrand as the c |S|^{-1/2}
// exp(b^T S^{-1} b / 4) form with S = Sigma^{-1}/2 + p2 R, b = Sigma^{-1} mu,
// but avoids the cancellation between -mu^T Sigma^{-1} mu / 2 and
// b^T S^{-1} b / 4 that destroys the latter for small noise.

#include <optional>
#include <string>
#include <vector>

#include "dmduq/data_model.hpp"
#include "dmduq/numerics.hpp"

namespace dmduq {

enum class QuadratureMethod { kGaussLaguerre, kAdaptiveTruncated };

struct QuadratureConfig {
  QuadratureMethod method = QuadratureMethod::kGaussLaguerre;
  int node_count = 64;    // Gauss-Laguerre nodes, [1, 256]
  double p2_max = 400.0;  // truncation point of the adaptive rule
  double rel_tol = 1e-8;  // (0, 1e-2]
  // Evaluate both rules and raise QuadratureNotConverged when they disagree
  // by more than 100 * rel_tol of the integrand's L1 mass.
  bool cross_check = false;

  void validate() const;
};

std::string quadrature_method_name(QuadratureMethod method);
QuadratureMethod parse_quadrature_method(const std::string& name);

// Conditional MGF data for element (t, k).
struct MgfContext {
  Index t = 0;
  Index k = 0;
  Matrix v;            // V = sum_{l != t} x_l x_l^T + ridge I
  double v_log_det = 0.0;
  Matrix r_matrix;     // R = V^{-1}
  Vector r;            // k-th column of R
  Vector mu;           // recorded snapshot column t
  Vector b;            // Sigma^{-1} mu
  Matrix sigma;        // noise covariance
  SpdFactor sigma_factor;
  double sigma_log_det = 0.0;
  double log_c = 0.0;  // ln( exp(-mu^T Sigma^{-1} mu / 2) / (2^{n/2} |Sigma|^{1/2}) )
  double ridge = 0.0;

  Index n() const { return mu.size(); }
};

struct PinvMoments {
  Matrix first;       // m x n, E[x+_{tk}]
  Matrix second_raw;  // m x n, E[(x+_{tk})^2]
};

// Builds the context for element (t, k). Raises SingularV if V (plus ridge) is
// not numerically positive definite.
MgfContext build_context(const SnapshotSet& snapshots, const NoiseModel& noise, Index t, Index k,
                         double ridge = 0.0);

// s1 / s2 evaluated at the recorded snapshot; equals element (t, k) of
// X^T (X X^T)^{-1} when ridge = 0.
double deterministic_pinv_element(const MgfContext& context);

struct LogSigned {
  double log_magnitude = 0.0;
  int sign = 1;

  double value() const;
};

// h(p1, -p2 | R) = c2 exp((b + p1 r)^T S^{-1} (b + p1 r) / 4) in the direct
// closed form, c2 = exp(-mu^T Sigma^{-1} mu / 2 - p2) / (2^{n/2} |S|^{1/2} |Sigma|^{1/2}).
LogSigned mgf_closed_form(const MgfContext& context, double p1, double p2);

// First and second p1-derivatives of h(p1, -p2 | R) at p1 = 0, evaluated in
// the stable W(p2) form described above.
struct MgfDerivatives {
  LogSigned first;
  LogSigned second;
};
MgfDerivatives mgf_derivatives(const MgfContext& context, double p2);

double first_moment_element(const MgfContext& context, const QuadratureConfig& quad = {});
double second_moment_element(const MgfContext& context, const QuadratureConfig& quad = {});

// All m * n elements, computed column by column (parallel over t; the result
// does not depend on the thread count). threads <= 0 uses default_thread_count().
PinvMoments pinv_moments(const SnapshotSet& snapshots, const NoiseModel& noise,
                         const QuadratureConfig& quad = {}, double ridge = 0.0,
                         int threads = 0);

// Both rules on one element, for diagnostics.
struct QuadratureComparison {
  double laguerre_first = 0.0;
  double adaptive_first = 0.0;
  double laguerre_second = 0.0;
  double adaptive_second = 0.0;
};
QuadratureComparison compare_quadrature_rules(const MgfContext& context,
                                              const QuadratureConfig& quad);

}  // namespace dmduq
