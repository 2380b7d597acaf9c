#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbslab/cylinder.hpp"
#include "gibbslab/diagnostics.hpp"
#include "gibbslab/estimate.hpp"
#include "gibbslab/oracle.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/serialize.hpp"
#include "gibbslab/stability.hpp"

namespace gibbslab {

/// Independent chains for one verification: seeds derive_seed(master, i),
/// or the explicit list when one is given.
struct ChainPlan {
  ChainParams params;
  std::uint64_t master_seed = 1;
  std::size_t chains = 4;
  std::vector<std::uint64_t> explicit_seeds;
  std::size_t workers = 1;

  [[nodiscard]] std::vector<std::uint64_t> seeds() const;
};

/// Optional exact reference values for a verification.
struct OracleRequest {
  TruncationSpec trunc;
  OracleOptions options;
};

/// A side comparison recorded alongside the main residual.
struct Check {
  std::string name;
  double estimate = 0.0;
  double reference = 0.0;
  /// Combined standard error used for the z-score.
  double std_error = 0.0;
  double z_score = 0.0;
  bool pass = true;
};

class VerificationAborted : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct VerificationReport {
  std::string test;
  Estimate lhs;
  Estimate rhs;
  Estimate residual;
  double z_score = 0.0;
  double tolerance_sigma = 3.0;
  /// One-sided reports pass when z_score <= tolerance_sigma.
  bool one_sided = false;
  bool pass = false;
  Verdict verdict = Verdict::fail;
  std::string model_hash;
  std::vector<std::uint64_t> seeds;
  /// 10%-trimmed mean of the per-sample residual; informational.
  std::optional<double> trimmed_residual;
  std::optional<double> tail_bound;
  std::vector<Check> checks;
  std::string note;
};

/// residual.mean / residual.std_error; 0 when both vanish.
[[nodiscard]] double z_score_of(const Estimate& residual);

[[nodiscard]] Json to_json(const VerificationReport& r);

/// v . E[grad F] against beta E[F v . <grad psi, gamma>] on the same samples.
/// With an oracle request both sides are also compared with exact values.
[[nodiscard]] VerificationReport verify_ibp(const ModelSpec& model, const CylinderFunction& F, const Vec& v,
                                            const ChainPlan& plan, const std::optional<OracleRequest>& oracle = {},
                                            double tolerance_sigma = 3.0);

/// E_psi[F] against E_0[F e^{-beta <psi, gamma>}] / E_0[e^{-beta <psi, gamma>}].
/// Both chain sets use the same seeds. With an oracle request Xi_psi and
/// E_psi[F] are compared with exact values.
[[nodiscard]] VerificationReport verify_reweighting(const ModelSpec& model_m, const ModelSpec& model_psi,
                                                    const CylinderFunction& F, const ChainPlan& plan,
                                                    const std::optional<OracleRequest>& oracle = {},
                                                    double tolerance_sigma = 3.0);

/// E[F(gamma + v) - F(gamma)] under the model with psi removed.
[[nodiscard]] VerificationReport verify_translation_invariance(const ModelSpec& model, const CylinderFunction& F,
                                                               const Vec& v, const ChainPlan& plan,
                                                               double tolerance_sigma = 3.0);

/// F(gamma) against the exact conditional expectation of F given gamma
/// outside the window, per sample.
[[nodiscard]] VerificationReport verify_dlr(const ModelSpec& model, const CylinderFunction& F, const Window& window,
                                            const ChainPlan& plan, const TruncationSpec& trunc,
                                            const WindowIntegrator::Options& inner = {},
                                            double tolerance_sigma = 3.0);

/// E[<f, gamma>] <= xi_hat z int f e^{-beta psi} dm + tolerance * std_error,
/// xi_hat from the intensity histogram of the same chains.
[[nodiscard]] VerificationReport verify_l1_bound(const ModelSpec& model, const std::function<double(const Point&)>& f,
                                                 const ChainPlan& plan, const DiagnoseOptions& diag = {},
                                                 const QuadratureSpec& quad = {}, double tolerance_sigma = 3.0);

} // namespace gibbslab
