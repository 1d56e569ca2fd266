#pragma once

#include "gaugeatlas/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace gaugeatlas::ingest {

enum class SynthMode {
  /// Gaussian clusters, each living near its own planted orthonormal frame.
  gaussian,
  /// Noiseless construction whose overlap transports equal planted
  /// orthogonal maps exactly (up to the per-chart frame PCA picks).
  planted_transport,
};

enum class FrameMode { random, aligned, shared };

/// Orthogonal map planted on the transport from chart u to chart v (u < v).
struct PlantedRotation {
  std::size_t u = 0;
  std::size_t v = 0;
  Matrix rotation;
};

/// Parameters for desk-scale synthetic atlases with known ground truth.
///
/// gaussian: cluster c draws x = center_c + F_c (axis_scales .* xi) + noise_std * eta,
/// where F_c is a d x latent_dim frame chosen per `frames` (independent Haar,
/// Haar base plus `frame_jitter` perturbation, or one shared frame).
///
/// planted_transport: charts sit on a regular simplex (`separation` apart);
/// chart c spans sqrt(w) E_0 + sqrt(1 - w) E_c with shared plane E_0 and private
/// plane E_c, w = `shared_weight`. Every chart contributes one group of
/// samples per other chart, placed a fraction `boundary_offset` toward it so
/// that the pair (nearest, second-nearest) is exactly (c, partner). In-plane
/// coordinates are cross-polytope shells (`shell_radii`), so overlap
/// covariances are isotropic and the fitted ridge transport is exactly
/// proportional to the planted rotation for any ridge strength. Dimension is
/// n_clusters + k + n_clusters * k and `dim`/`samples_per_cluster` are derived.
struct SynthSpec {
  SynthMode mode = SynthMode::gaussian;
  std::uint64_t seed = 0;
  std::size_t n_clusters = 3;
  std::size_t samples_per_cluster = 200;

  bool with_gradients = true;
  std::size_t grad_rank = 1;
  double grad_scale = 1.0;
  double grad_noise = 0.01;

  // gaussian
  std::size_t dim = 16;
  std::vector<std::vector<double>> centers;  // empty -> random N(0, center_scale^2)
  double center_scale = 10.0;
  std::vector<double> axis_scales = {3.0, 2.5, 2.0, 1.5};  // latent_dim = size
  double noise_std = 0.05;
  FrameMode frames = FrameMode::random;
  double frame_jitter = 0.1;

  // planted_transport
  std::size_t chart_dim = 2;
  double separation = 20.0;
  double boundary_offset = 0.02;
  double shared_weight = 0.1;
  double rho = 0.3;
  std::vector<double> shell_radii = {0.5, 1.0, 1.5, 2.0};
  std::vector<PlantedRotation> planted;
};

struct GroundTruth {
  std::vector<std::size_t> labels;   // planted cluster per sample
  Matrix centers;                    // C x d
  std::vector<Matrix> frames;        // per cluster, d x latent
  std::vector<PlantedRotation> planted;
};

struct SynthResult {
  SampleMatrix activations;
  SampleMatrix gradients;  // empty (0 x 0) when with_gradients is false
  GroundTruth truth;
};

/// Pure function of `spec`; throws SynthSpecError for degenerate or
/// inconsistent requests (rank-0 covariance, bad rotations, a construction
/// whose Voronoi/PCA structure would not come out as designed).
SynthResult synth_atlas_dataset(const SynthSpec& spec);

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);

}  // namespace gaugeatlas::ingest
