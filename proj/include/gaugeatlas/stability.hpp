#pragma once

#include "gaugeatlas/atlas.hpp"
#include "gaugeatlas/gauge.hpp"
#include "gaugeatlas/stats.hpp"
#include "gaugeatlas/transport.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gaugeatlas::stability {

enum class Target { shear, holonomy };
enum class Scope { global, per_edge, per_loop };
std::string to_string(Target t);
std::string to_string(Scope s);

/// Fixed per-edge inputs for resampling: full overlap coordinates and the proxy.
struct EdgeSample {
  Edge edge;
  Matrix z_u;  // k x n
  Matrix z_v;  // k x n
  Matrix p;    // proxy, fixed across replicates
};

std::map<Edge, EdgeSample> edge_samples(const SampleMatrix& data, const std::vector<atlas::OverlapSet>& overlaps,
                                        const std::vector<atlas::ChartBasis>& charts);

struct BootstrapParams {
  std::size_t replicates = 100;  // B
  std::size_t n_boot = 512;
  bool cap_to_overlap = true;    // else edges with fewer points are unusable
  double lambda = 1e-2;
  std::uint64_t seed = 0;
};

struct BootstrapSummary {
  Target target = Target::shear;
  Scope scope = Scope::global;
  std::string label;                 // "all", an edge "u-v" or a chord "u-v"
  std::size_t n_boot = 0;
  std::size_t replicates = 0;
  std::size_t n_targets = 0;
  std::size_t realized_samples = 0;
  std::size_t dropped = 0;           // replicates x targets - realized
  Distribution stats;
  std::vector<double> values;        // target-major, replicate-minor
};

/// Resamples each edge's overlap i.i.d. with replacement, refits T and Q, and
/// records D_shear against the fixed proxy.
BootstrapSummary bootstrap_shear(const std::vector<EdgeSample>& edges, const BootstrapParams& params);

/// Per replicate and cycle: resamples every cycle edge, rebuilds the defects
/// and evaluates d_hol. Replicate-cycle pairs with an unusable edge are dropped.
BootstrapSummary bootstrap_holonomy(const std::vector<std::vector<ChartId>>& cycles,
                                    const std::map<Edge, EdgeSample>& edges, const BootstrapParams& params);

/// One side of the learned-vs-random-bases comparison.
struct NullRow {
  std::string variant;
  std::size_t usable_edges = 0;
  std::size_t lcc_size = 0;
  std::size_t n_chords = 0;
  double tree_residual_mean = 0;
  double d_hol_mean = 0;
  double d_hol_max = 0;
  Distribution slack;
  Distribution d_shear;
};

NullRow null_row(const std::string& variant, const std::vector<transport::EdgeTransport>& records);

/// Haar-random d x k bases (seeded per chart) in place of the fitted ones;
/// chart means and usability are kept.
std::vector<atlas::ChartBasis> random_bases(const std::vector<atlas::ChartBasis>& charts, std::size_t k,
                                            std::uint64_t seed);

struct NullComparison {
  NullRow learned;
  NullRow null;
  std::vector<transport::EdgeTransport> null_edges;
};

NullComparison null_random_bases(const SampleMatrix& data, const atlas::Atlas& atlas, double lambda,
                                 std::uint64_t seed);

nlohmann::json to_json(const BootstrapSummary& s);
nlohmann::json to_json(const NullRow& r);

/// Columns: subsystem, scope, label, metric, n_boot, n_samples, mean, std, q05, q50, q95.
void write_bootstrap_csv(const std::filesystem::path& path, const std::vector<BootstrapSummary>& rows);
void write_null_csv(const std::filesystem::path& path, const NullComparison& cmp);

}  // namespace gaugeatlas::stability
