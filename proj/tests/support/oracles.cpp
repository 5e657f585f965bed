#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace hal::testing {

namespace {

double reference_example_loss(const EncodedDocument& doc, const EmbeddingTable& table, const ModelParams& p,
                              Pooling pooling, Rng* noise) {
  const std::size_t seq = doc.seq_len();
  const std::size_t k = table.dim();
  std::vector<double> s(k, 0.0);
  if (pooling == Pooling::Attention) {
    std::vector<double> weight(seq, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < seq; ++t) {
      if (!doc.mask[t]) continue;
      const auto x = table.row(doc.ids[t]);
      double e = 0.0;
      for (std::size_t a = 0; a < p.attention.w_a.rows(); ++a) {
        double u = p.attention.b_a[a];
        for (std::size_t c = 0; c < k; ++c) u += p.attention.w_a(a, c) * x[c];
        e += p.attention.v_a[a] * std::tanh(u);
      }
      weight[t] = std::exp(e / p.attention.temperature);
      total += weight[t];
    }
    for (std::size_t t = 0; t < seq; ++t) {
      if (!doc.mask[t]) continue;
      const auto x = table.row(doc.ids[t]);
      for (std::size_t c = 0; c < k; ++c) s[c] += weight[t] / total * x[c];
    }
  } else {
    double count = 0.0;
    for (std::size_t t = 0; t < seq; ++t) {
      if (!doc.mask[t]) continue;
      count += 1.0;
      const auto x = table.row(doc.ids[t]);
      for (std::size_t c = 0; c < k; ++c) s[c] += x[c];
    }
    for (double& v : s) v /= count;
  }

  const auto& c = p.classifier;
  const std::size_t h = c.w_c.rows();
  std::vector<double> z(h);
  for (std::size_t j = 0; j < h; ++j) {
    z[j] = c.b_c[j];
    for (std::size_t i = 0; i < k; ++i) z[j] += c.w_c(j, i) * s[i];
  }
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(h);
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    const double normalized = (z[j] - mean) / std::sqrt(var + kLayerNormEpsilon);
    const double relu = std::max(0.0, c.ln_gain[j] * normalized + c.ln_shift[j]);
    double keep = 1.0;
    if (noise && c.dropout_p > 0.0) keep = noise->uniform() < c.dropout_p ? 0.0 : 1.0 / (1.0 - c.dropout_p);
    hidden[j] = relu * keep;
  }
  double logits[2];
  for (std::size_t o = 0; o < 2; ++o) {
    logits[o] = c.b_o[o];
    for (std::size_t j = 0; j < h; ++j) logits[o] += c.w_o(o, j) * hidden[j];
  }
  const std::size_t y = doc.label == Label::Positive ? 1 : 0;
  return std::log(std::exp(logits[0]) + std::exp(logits[1])) - logits[y];
}

}  // namespace

double reference_loss(std::span<const EncodedDocument> batch, const EmbeddingTable& table, const ModelParams& params,
                      Pooling pooling, double weight_decay, std::optional<std::uint64_t> noise_seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::optional<Rng> noise;
    if (noise_seed) noise.emplace(Rng::derive(*noise_seed, i));
    total += reference_example_loss(batch[i], table, params, pooling, noise ? &*noise : nullptr);
  }
  double penalty = 0.0;
  const auto square_sum = [](const DenseMatrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
  };
  penalty += square_sum(params.classifier.w_c) + square_sum(params.classifier.w_o);
  if (pooling == Pooling::Attention) penalty += square_sum(params.attention.w_a);
  return total / static_cast<double>(batch.size()) + weight_decay * penalty;
}

Gradients finite_difference_gradients(const std::function<double(const ModelParams&)>& loss,
                                      const ModelParams& params, double step) {
  Gradients out = Gradients::zeros_like(params);
  ModelParams probe = params;
  auto probe_tensors = tensors(probe);
  auto out_tensors = tensors(out);
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    for (std::size_t j = 0; j < probe_tensors[t].data.size(); ++j) {
      const double saved = probe_tensors[t].data[j];
      probe_tensors[t].data[j] = saved + step;
      const double up = loss(probe);
      probe_tensors[t].data[j] = saved - step;
      const double down = loss(probe);
      probe_tensors[t].data[j] = saved;
      out_tensors[t].data[j] = (up - down) / (2.0 * step);
    }
  }
  return out;
}

double max_relative_error(const Gradients& analytic, const Gradients& numeric, double floor) {
  const auto a = tensors(analytic);
  const auto n = tensors(numeric);
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t j = 0; j < a[t].data.size(); ++j) {
      const double x = a[t].data[j];
      const double y = n[t].data[j];
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
    }
  }
  return worst;
}

namespace {

Eigen::MatrixXd to_eigen(const DenseMatrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c);
  }
  return m;
}

DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  DenseMatrix a(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  }
  return a;
}

Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
}

}  // namespace

DenseSvd dense_svd(const DenseMatrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
  DenseSvd out;
  const auto& s = svd.singularValues();
  out.singular_values.assign(s.data(), s.data() + s.size());
  out.u = from_eigen(svd.matrixU());
  out.v = from_eigen(svd.matrixV());
  return out;
}

double optimal_rank_error(std::span<const double> singular_values, std::size_t k) {
  double tail = 0.0;
  for (std::size_t i = k; i < singular_values.size(); ++i) tail += singular_values[i] * singular_values[i];
  return std::sqrt(tail);
}

double reconstruction_error(const DenseMatrix& a, const SvdResult& svd) {
  double sum = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double approx = 0.0;
      for (std::size_t i = 0; i < svd.singular_values.size(); ++i) {
        approx += svd.u(r, i) * svd.singular_values[i] * svd.vt(i, c);
      }
      sum += (a(r, c) - approx) * (a(r, c) - approx);
    }
  }
  return std::sqrt(sum);
}

double orthonormality_residual(const DenseMatrix& q) {
  double worst = 0.0;
  for (std::size_t i = 0; i < q.cols(); ++i) {
    for (std::size_t j = 0; j < q.cols(); ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < q.rows(); ++r) d += q(r, i) * q(r, j);
      worst = std::max(worst, std::abs(d - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

DenseMatrix random_matrix_with_spectrum(std::size_t rows, std::size_t cols, double decay, double scale, Rng& rng) {
  const auto rank = std::min(rows, cols);
  const Eigen::MatrixXd u = random_orthonormal(rows, rank, rng);
  const Eigen::MatrixXd v = random_orthonormal(cols, rank, rng);
  Eigen::VectorXd sigma(rank);
  for (std::size_t i = 0; i < rank; ++i) sigma(static_cast<Eigen::Index>(i)) = scale * std::pow(decay, static_cast<double>(i));
  return from_eigen(u * sigma.asDiagonal() * v.transpose());
}

}  // namespace hal::testing
