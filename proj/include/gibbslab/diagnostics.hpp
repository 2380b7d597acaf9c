#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gibbslab/estimate.hpp"
#include "gibbslab/sampler.hpp"

namespace gibbslab {

struct DiagnoseOptions {
  /// Histogram bins per axis.
  std::size_t bins_per_axis = 4;
  /// Midpoint sub-nodes per axis and bin for the reference mass z * int e^{-beta psi}.
  std::size_t reference_nodes = 16;
  int temperedness_l = 1;
  /// Cell edge of the temperedness grid; shrunk to min_side / (2l + 1) when
  /// the grid would not fit.
  double cell_edge = 1.0;
};

struct IntensityBin {
  std::vector<std::size_t> index;
  /// Mean number of sampled points in the bin per sample.
  Estimate mean_count;
  /// z * integral of e^{-beta psi} over the bin.
  double reference = 0.0;
  double ratio = 0.0;
  double ratio_std_error = 0.0;
};

struct DiagnosticsReport {
  std::size_t samples = 0;
  std::size_t empty_samples = 0;
  MoveStats moves;
  double acceptance_birth = 0.0;
  double acceptance_death = 0.0;
  double acceptance_displacement = 0.0;
  /// Integrated autocorrelation time and ESS of the point count series.
  double autocorrelation_time = 1.0;
  double ess = 0.0;
  std::vector<std::int64_t> temperedness;
  double cell_edge = 1.0;
  std::vector<IntensityBin> histogram;
  /// Smallest xi with rho_1 <= xi * z e^{-beta psi} on every bin.
  double xi_hat = 0.0;
  double xi_std_error = 0.0;
  std::size_t xi_bin = 0;
};

/// Requires a trace with kept configurations. Empty configurations add no
/// points to the histogram but count as samples; their number is reported.
[[nodiscard]] DiagnosticsReport diagnose(const ModelSpec& model, const Trace& trace, const MoveStats& moves = {},
                                         const DiagnoseOptions& options = {});

/// Diagnostics over several chains: histograms and counts are pooled.
[[nodiscard]] DiagnosticsReport diagnose(const ModelSpec& model, const std::vector<ChainResult>& chains,
                                         const DiagnoseOptions& options = {});

} // namespace gibbslab
