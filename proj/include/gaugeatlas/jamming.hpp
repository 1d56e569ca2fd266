#pragma once

#include "gaugeatlas/stats.hpp"
#include "gaugeatlas/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gaugeatlas::jamming {

struct FisherEstimate {
  std::size_t chart = 0;
  Matrix g;  // m x m, symmetric PSD
  std::size_t n_samples = 0;
};

/// G = (1/n) sum_z g_z g_z^T over the rows of `code_grads` (n x m), symmetrised.
FisherEstimate fisher_estimate(const Matrix& code_grads, std::size_t chart = 0);

struct HarmMatrix {
  std::size_t chart = 0;
  Matrix w;  // m x m, zero diagonal
  double tau = 0;
};

/// W_ij = |G~_ij| off the diagonal, G~ = (diag G + tau I)^{-1/2} G (diag G + tau I)^{-1/2}.
HarmMatrix harm_matrix(const Matrix& g, double tau, std::size_t chart = 0);

/// Tr(G)^2 / Tr(G^2). Throws DegenerateInputError for G = 0.
double effective_rank(const Matrix& g);

/// Mean over rows of ||z||_1^2 / ||z||_2^2 (zero rows count as 0).
double participation_active(const Matrix& codes);

double jamming_index(double k_active, double r_eff);

struct DictionaryParams {
  std::size_t m = 256;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_alternations = 50;
  std::size_t cd_passes = 100;
  double tol = 1e-6;
};

struct Dictionary {
  std::size_t chart = 0;
  Matrix atoms;  // m x d, unit rows
  Matrix codes;  // n x m
  double alpha = 0;
  std::uint64_t seed = 0;
  std::size_t alternations = 0;
};

/// Lasso codes min_z 0.5||x - z D||^2 + alpha ||z||_1 per row of x, by cyclic
/// coordinate descent on the Gram matrix D D^T. `warm` may be empty.
Matrix sparse_codes(const Matrix& x, const Matrix& atoms, double alpha, std::size_t passes,
                    double tol, const Matrix& warm = Matrix());

/// Alternates sparse coding and per-atom least-squares updates with row
/// renormalisation, starting from randomly chosen normalised data rows.
Dictionary learn_dictionary(const Matrix& x, const DictionaryParams& params, std::size_t chart = 0);

struct ProjectedGram {
  Matrix k;                   // m x m, zero diagonal, zero rows for excluded atoms
  std::vector<bool> excluded; // ||a_i|| < 1e-10
};

/// a_i = atom_i B_r normalised; K_ij = <a_i, a_j> for i != j.
ProjectedGram projected_gram(const Matrix& atoms, const Matrix& b_r);

struct SubsetResult {
  std::vector<std::size_t> subset;  // ascending
  double tau_star = 0;
  double lb = 0;
};

/// tau (|A|^2 / r - |A|)_+.
double certified_bound(double tau_star, std::size_t subset_size, std::size_t r);

/// Threshold sweep over off-diagonal W quantiles with greedy clique growth, plus a
/// threshold-free max-min growth from every start. Every prefix is scored.
SubsetResult find_consequential_subset(const Matrix& w, std::size_t r,
                                       const std::vector<bool>& excluded = {});

/// sum_{i != j in A} W_ij K_ij^2; the second overload sums over every pair.
double interference_energy(const Matrix& w, const Matrix& k, const std::vector<std::size_t>& subset);
double interference_energy(const Matrix& w, const Matrix& k);

struct JammingCertificate {
  std::size_t chart = 0;
  std::size_t n_grad = 0;
  std::size_t m = 0;
  double alpha = 0;
  std::size_t r = 0;
  double k_active = 0;
  double r_eff = 0;
  double j_index = 0;
  std::vector<std::size_t> subset;
  double tau_star = 0;
  double lb = 0;
  double energy_a = 0;
  double energy_full = 0;
  double slack = 0;  // NaN when lb = 0
  bool certified = false;
};

/// Validates the subset, evaluates E_A and the bound. Throws
/// CertificateInputError for an invalid subset and InternalInvariantError when
/// the energy falls below a positive bound.
JammingCertificate certify(const Matrix& w, const Matrix& k, const std::vector<std::size_t>& subset,
                           double tau_star, std::size_t r);

struct ChartParams {
  DictionaryParams dict;
  double tau_rel = 1e-6;  // tau = tau_rel * mean(diag G)
};

/// Dictionary, Fisher, harm, rank, projection, subset and certificate for one chart.
/// `x` and `grads` are the chart's n x d activations and gradients.
JammingCertificate analyze_chart(const Matrix& x, const Matrix& grads, const ChartParams& params,
                                 std::size_t chart);

struct JammingSummary {
  std::size_t n_charts = 0;
  std::size_t n_certified = 0;
  double cert_rate = 0;
  std::size_t n_violations = 0;
  Distribution slack;  // certified charts
  double corr_j_energy_full = 0;
  double corr_j_energy_a = 0;
};

JammingSummary summarize(const std::vector<JammingCertificate>& certs);
nlohmann::json to_json(const JammingSummary& s);
void write_certificates_csv(const std::filesystem::path& path, const std::vector<JammingCertificate>& certs);

}  // namespace gaugeatlas::jamming
