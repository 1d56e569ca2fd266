#include "gaugeatlas/jamming.hpp"

#include "gaugeatlas/csv.hpp"
#include "gaugeatlas/errors.hpp"
#include "gaugeatlas/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <tuple>

namespace gaugeatlas::jamming {
namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

FisherEstimate fisher_estimate(const Matrix& code_grads, std::size_t chart) {
  if (code_grads.rows() == 0) throw DegenerateInputError("fisher_estimate: no gradient samples");
  FisherEstimate f;
  f.chart = chart;
  f.n_samples = static_cast<std::size_t>(code_grads.rows());
  const Matrix g = code_grads.transpose() * code_grads / static_cast<double>(code_grads.rows());
  f.g = 0.5 * (g + g.transpose());
  return f;
}

HarmMatrix harm_matrix(const Matrix& g, double tau, std::size_t chart) {
  if (!(tau > 0.0)) throw ConfigError("harm_matrix: tau must be > 0");
  const Eigen::Index m = g.rows();
  Vector scale(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = g(i, i) + tau;
    if (!(d > 0.0)) throw DegenerateInputError("harm_matrix: non-positive damped diagonal");
    scale(i) = 1.0 / std::sqrt(d);
  }
  HarmMatrix h;
  h.chart = chart;
  h.tau = tau;
  const Matrix w = (scale.asDiagonal() * g * scale.asDiagonal()).cwiseAbs();
  // s_i g_ij s_j and s_j g_ji s_i round differently; keep W exactly symmetric.
  h.w = 0.5 * (w + w.transpose());
  h.w.diagonal().setZero();
  return h;
}

double effective_rank(const Matrix& g) {
  const double tr = g.trace();
  const double tr2 = g.squaredNorm();
  if (tr2 == 0.0) throw DegenerateInputError("effective_rank: G = 0");
  return tr * tr / tr2;
}

double participation_active(const Matrix& codes) {
  if (codes.rows() == 0) return nan();
  std::vector<double> per_row(static_cast<std::size_t>(codes.rows()));
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    const double l2 = codes.row(i).squaredNorm();
    const double l1 = codes.row(i).lpNorm<1>();
    per_row[static_cast<std::size_t>(i)] = l2 > 0.0 ? l1 * l1 / l2 : 0.0;
  }
  return mean(per_row);
}

double jamming_index(double k_active, double r_eff) {
  if (!(r_eff > 0.0)) throw DegenerateInputError("jamming_index: r_eff must be positive");
  return k_active / r_eff;
}

Matrix sparse_codes(const Matrix& x, const Matrix& atoms, double alpha, std::size_t passes, double tol,
                    const Matrix& warm) {
  const Eigen::Index n = x.rows(), m = atoms.rows();
  const Matrix h = atoms * atoms.transpose();
  const Matrix c = x * atoms.transpose();
  Matrix z = warm.size() ? warm : Matrix::Zero(n, m);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    Vector zi = z.row(i).transpose();
    Vector r = c.row(i).transpose() - h * zi;  // r = D x - H z
    for (std::size_t pass = 0; pass < passes; ++pass) {
      double max_delta = 0.0, max_z = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double hjj = h(j, j);
        if (hjj <= 0.0) continue;
        const double old = zi(j);
        const double updated = soft_threshold(r(j) + hjj * old, alpha) / hjj;
        const double delta = updated - old;
        if (delta != 0.0) {
          zi(j) = updated;
          r.noalias() -= h.col(j) * delta;
          max_delta = std::max(max_delta, std::abs(delta));
        }
        max_z = std::max(max_z, std::abs(updated));
      }
      if (max_delta <= tol * std::max(1.0, max_z)) break;
    }
    z.row(i) = zi.transpose();
  });
  return z;
}

Dictionary learn_dictionary(const Matrix& x, const DictionaryParams& p, std::size_t chart) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0) throw DegenerateInputError("learn_dictionary: no samples");
  if (p.m == 0) throw ConfigError("learn_dictionary: m must be >= 1");
  if (!(p.alpha >= 0.0)) throw ConfigError("learn_dictionary: alpha must be >= 0");
  const auto m = static_cast<Eigen::Index>(p.m);

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto random_unit = [&] {
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = normal(rng);
    return Vector(v / v.norm());
  };

  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  Dictionary dict;
  dict.chart = chart;
  dict.alpha = p.alpha;
  dict.seed = p.seed;
  dict.atoms.resize(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    const bool fresh = j < n;
    const Vector row = fresh ? Vector(x.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])).transpose())
                             : Vector::Zero(d);
    const double norm = row.norm();
    dict.atoms.row(j) = (fresh && norm > 1e-12 ? Vector(row / norm) : random_unit()).transpose();
  }

  Matrix codes;
  for (std::size_t it = 1; it <= p.max_alternations; ++it) {
    dict.alternations = it;
    codes = sparse_codes(x, dict.atoms, p.alpha, p.cd_passes, p.tol, codes);
    const Matrix a = codes.transpose() * codes;
    const Matrix b = codes.transpose() * x;
    const Matrix previous = dict.atoms;
    std::vector<Eigen::Index> dead;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (a(j, j) < 1e-12) {
        dead.push_back(j);
        continue;
      }
      const Vector u = dict.atoms.row(j).transpose() +
                       (b.row(j).transpose() - (a.row(j) * dict.atoms).transpose()) / a(j, j);
      const double norm = u.norm();
      if (norm < 1e-12) {
        dead.push_back(j);
        continue;
      }
      dict.atoms.row(j) = (u / norm).transpose();
    }
    if (!dead.empty()) {
      const Matrix resid = x - codes * dict.atoms;
      std::vector<std::pair<double, Eigen::Index>> order;
      for (Eigen::Index i = 0; i < n; ++i) order.emplace_back(-resid.row(i).squaredNorm(), i);
      std::sort(order.begin(), order.end());
      for (std::size_t t = 0; t < dead.size() && t < order.size(); ++t) {
        if (-order[t].first < 1e-24) break;
        const Vector row = x.row(order[t].second).transpose();
        if (row.norm() > 1e-12) dict.atoms.row(dead[t]) = (row / row.norm()).transpose();
      }
    }
    if ((dict.atoms - previous).cwiseAbs().maxCoeff() < p.tol) break;
  }
  dict.codes = sparse_codes(x, dict.atoms, p.alpha, p.cd_passes, p.tol, codes);
  return dict;
}

ProjectedGram projected_gram(const Matrix& atoms, const Matrix& b_r) {
  Matrix a = atoms * b_r;
  const Eigen::Index m = a.rows();
  ProjectedGram out;
  out.excluded.assign(static_cast<std::size_t>(m), false);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = a.row(i).norm();
    if (norm < 1e-10) {
      out.excluded[static_cast<std::size_t>(i)] = true;
      a.row(i).setZero();
    } else {
      a.row(i) /= norm;
    }
  }
  out.k = a * a.transpose();
  out.k.diagonal().setZero();
  return out;
}

double certified_bound(double tau_star, std::size_t subset_size, std::size_t r) {
  const double s = static_cast<double>(subset_size);
  return tau_star * std::max(s * s / static_cast<double>(r) - s, 0.0);
}

SubsetResult find_consequential_subset(const Matrix& w, std::size_t r, const std::vector<bool>& excluded) {
  if (r == 0) throw CertificateInputError("find_consequential_subset: r must be >= 1");
  const auto m = static_cast<std::size_t>(w.rows());
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < m; ++i)
    if (excluded.empty() || !excluded.at(i)) eligible.push_back(i);
  SubsetResult best;
  if (eligible.size() < 2) return best;

  std::vector<double> off;
  for (std::size_t a = 0; a < eligible.size(); ++a)
    for (std::size_t b = a + 1; b < eligible.size(); ++b)
      off.push_back(w(static_cast<Eigen::Index>(eligible[a]), static_cast<Eigen::Index>(eligible[b])));

  const auto W = [&](std::size_t i, std::size_t j) {
    return w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };
  bool found = false;
  for (double q : {0.50, 0.60, 0.70, 0.80, 0.90, 0.95}) {
    const double tau = quantile(off, q);
    const auto above = [&](std::size_t i, std::size_t j) { return W(i, j) >= tau && W(i, j) > 0.0; };

    std::size_t start = m, start_deg = 0;
    for (std::size_t i : eligible) {
      std::size_t deg = 0;
      for (std::size_t j : eligible)
        if (j != i && above(i, j)) ++deg;
      if (deg > start_deg) {
        start_deg = deg;
        start = i;
      }
    }
    if (start == m) continue;

    std::vector<std::size_t> members{start};
    std::vector<double> min_w(m, std::numeric_limits<double>::infinity());
    std::vector<bool> candidate(m, false);
    for (std::size_t j : eligible)
      if (j != start && above(start, j)) {
        candidate[j] = true;
        min_w[j] = W(start, j);
      }
    double current_min = std::numeric_limits<double>::infinity();
    while (true) {
      std::size_t pick = m;
      for (std::size_t j : eligible)
        if (candidate[j] && (pick == m || min_w[j] > min_w[pick])) pick = j;
      if (pick == m) break;
      candidate[pick] = false;
      current_min = std::min(current_min, min_w[pick]);
      members.push_back(pick);
      for (std::size_t j : eligible) {
        if (!candidate[j]) continue;
        if (above(pick, j)) min_w[j] = std::min(min_w[j], W(pick, j));
        else candidate[j] = false;
      }
      const double lb = certified_bound(current_min, members.size(), r);
      const auto key = std::make_tuple(lb, members.size(), current_min);
      if (!found || key > std::make_tuple(best.lb, best.subset.size(), best.tau_star)) {
        found = true;
        best.lb = lb;
        best.tau_star = current_min;
        best.subset = members;
      }
    }
  }

  // Threshold-free pass: from every start, add the atom with the largest minimum
  // weight to the current members and score each prefix. Reaches low-tau subsets
  // that no quantile threshold admits.
  for (std::size_t start : eligible) {
    std::vector<std::size_t> members{start};
    std::vector<double> min_w(m, 0.0);
    std::vector<bool> candidate(m, false);
    for (std::size_t j : eligible)
      if (j != start) {
        candidate[j] = true;
        min_w[j] = W(start, j);
      }
    double current_min = std::numeric_limits<double>::infinity();
    while (true) {
      std::size_t pick = m;
      for (std::size_t j : eligible)
        if (candidate[j] && (pick == m || min_w[j] > min_w[pick])) pick = j;
      if (pick == m || !(min_w[pick] > 0.0)) break;
      candidate[pick] = false;
      current_min = std::min(current_min, min_w[pick]);
      members.push_back(pick);
      for (std::size_t j : eligible)
        if (candidate[j]) min_w[j] = std::min(min_w[j], W(pick, j));
      const double lb = certified_bound(current_min, members.size(), r);
      if (lb > best.lb) {
        best.lb = lb;
        best.tau_star = current_min;
        best.subset = members;
      }
    }
  }
  std::sort(best.subset.begin(), best.subset.end());
  return best;
}

double interference_energy(const Matrix& w, const Matrix& k, const std::vector<std::size_t>& subset) {
  std::vector<double> terms;
  for (std::size_t i : subset)
    for (std::size_t j : subset)
      if (i != j) {
        const double kij = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        terms.push_back(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * kij * kij);
      }
  return pairwise_sum(terms);
}

double interference_energy(const Matrix& w, const Matrix& k) {
  std::vector<std::size_t> all(static_cast<std::size_t>(w.rows()));
  std::iota(all.begin(), all.end(), 0);
  return interference_energy(w, k, all);
}

JammingCertificate certify(const Matrix& w, const Matrix& k, const std::vector<std::size_t>& subset,
                           double tau_star, std::size_t r) {
  if (r == 0) throw CertificateInputError("certify: r must be >= 1");
  if (!(tau_star >= 0.0) || !std::isfinite(tau_star)) throw CertificateInputError("certify: invalid tau_star");
  if (w.rows() != w.cols() || k.rows() != w.rows() || k.cols() != w.cols())
    throw CertificateInputError("certify: W and K must be square and the same size");
  const auto m = static_cast<std::size_t>(w.rows());
  std::vector<std::size_t> sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw CertificateInputError("certify: duplicate atom in subset");
  for (std::size_t i : sorted)
    if (i >= m) throw CertificateInputError("certify: atom index out of range");
  for (std::size_t a = 0; a < sorted.size(); ++a)
    for (std::size_t b = a + 1; b < sorted.size(); ++b)
      if (w(static_cast<Eigen::Index>(sorted[a]), static_cast<Eigen::Index>(sorted[b])) < tau_star)
        throw CertificateInputError("certify: subset is not tau_star-consequential");

  JammingCertificate c;
  c.m = m;
  c.r = r;
  c.subset = sorted;
  c.tau_star = tau_star;
  c.lb = certified_bound(tau_star, sorted.size(), r);
  c.energy_a = interference_energy(w, k, sorted);
  c.energy_full = interference_energy(w, k);
  c.certified = c.lb > 0.0;
  c.slack = c.certified ? c.energy_a / c.lb : nan();
  if (c.certified && c.slack < 1.0 - 1e-9)
    throw InternalInvariantError("certify: interference energy " + format_number(c.energy_a) +
                                 " below certified bound " + format_number(c.lb));
  return c;
}

JammingCertificate analyze_chart(const Matrix& x, const Matrix& grads, const ChartParams& params,
                                 std::size_t chart) {
  if (x.rows() == 0) throw DegenerateInputError("analyze_chart: no samples");
  if (grads.rows() != x.rows() || grads.cols() != x.cols())
    throw DegenerateInputError("analyze_chart: gradient block shape differs from activations");
  const Dictionary dict = learn_dictionary(x, params.dict, chart);
  const double k_active = participation_active(dict.codes);
  const FisherEstimate fisher = fisher_estimate(grads * dict.atoms.transpose(), chart);
  const double diag_mean = fisher.g.diagonal().mean();
  if (!(diag_mean > 0.0)) throw DegenerateInputError("analyze_chart: Fisher estimate is zero");
  const HarmMatrix harm = harm_matrix(fisher.g, params.tau_rel * diag_mean, chart);
  const double r_eff = effective_rank(fisher.g);

  const auto d = static_cast<std::size_t>(x.cols());
  const auto r = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(r_eff * (1.0 - 1e-12))), 1, d);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix b_r = top_eigenvectors(centered.transpose() * centered / static_cast<double>(x.rows()), r);
  const ProjectedGram proj = projected_gram(dict.atoms, b_r);
  const SubsetResult subset = find_consequential_subset(harm.w, r, proj.excluded);

  JammingCertificate c = certify(harm.w, proj.k, subset.subset, subset.tau_star, r);
  c.chart = chart;
  c.n_grad = static_cast<std::size_t>(x.rows());
  c.alpha = params.dict.alpha;
  c.k_active = k_active;
  c.r_eff = r_eff;
  c.j_index = jamming_index(k_active, r_eff);
  return c;
}

JammingSummary summarize(const std::vector<JammingCertificate>& certs) {
  JammingSummary s;
  s.n_charts = certs.size();
  std::vector<double> slack, j, e_full, e_a;
  for (const auto& c : certs) {
    j.push_back(c.j_index);
    e_full.push_back(c.energy_full);
    e_a.push_back(c.energy_a);
    if (!c.certified) continue;
    ++s.n_certified;
    slack.push_back(c.slack);
    if (c.slack < 1.0 - 1e-9) ++s.n_violations;
  }
  s.cert_rate = certs.empty() ? nan() : static_cast<double>(s.n_certified) / static_cast<double>(certs.size());
  s.slack = describe(slack);
  s.corr_j_energy_full = certs.size() < 2 ? nan() : pearson(j, e_full);
  s.corr_j_energy_a = certs.size() < 2 ? nan() : pearson(j, e_a);
  return s;
}

nlohmann::json to_json(const JammingSummary& s) {
  return {{"n_charts", s.n_charts},
          {"n_certified", s.n_certified},
          {"cert_rate", s.cert_rate},
          {"n_violations", s.n_violations},
          {"slack", distribution_json(s.slack)},
          {"corr_j_energy_full", s.corr_j_energy_full},
          {"corr_j_energy_a", s.corr_j_energy_a}};
}

void write_certificates_csv(const std::filesystem::path& path, const std::vector<JammingCertificate>& certs) {
  CsvWriter csv(path, {"chart", "n_grad", "m", "alpha", "r", "k_active", "r_eff", "j_index", "subset_size",
                       "tau_star", "lb", "energy_a", "energy_full", "slack", "certified"});
  for (const auto& c : certs)
    csv.row(c.chart, c.n_grad, c.m, c.alpha, c.r, c.k_active, c.r_eff, c.j_index, c.subset.size(), c.tau_star,
            c.lb, c.energy_a, c.energy_full, c.slack, c.certified);
}

}  // namespace gaugeatlas::jamming
