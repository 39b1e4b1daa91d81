#include "orl/nn/mlp.hpp"

#include <cmath>
#include <string>

#include "orl/errors.hpp"

namespace orl::nn {

namespace {

void check_same_shape(const NetParams& a, const NetParams& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (std::size_t i = 0; ok && i < a.layers.size(); ++i) {
    ok = a.layers[i].weight.rows() == b.layers[i].weight.rows() &&
         a.layers[i].weight.cols() == b.layers[i].weight.cols() &&
         a.layers[i].bias.size() == b.layers[i].bias.size();
  }
  if (!ok) throw ConfigError(std::string(what) + ": parameter shapes differ");
}

void check_grad_shape(const NetParams& p, const Gradients& g) {
  bool ok = p.layers.size() == g.size();
  for (std::size_t i = 0; ok && i < g.size(); ++i) {
    ok = p.layers[i].weight.rows() == g[i].weight.rows() &&
         p.layers[i].weight.cols() == g[i].weight.cols() &&
         p.layers[i].bias.size() == g[i].bias.size();
  }
  if (!ok) throw ConfigError("adam_step: gradient shapes do not match parameters");
}

Layer zero_like(const Layer& l) {
  return Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())};
}

}  // namespace

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

NetParams make_mlp(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("make_mlp: need at least input and output dims");
  NetParams net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto fan_in = dims[i];
    const auto fan_out = dims[i + 1];
    if (fan_in == 0 || fan_out == 0) throw ConfigError("make_mlp: zero-width layer");
    const bool output = i + 2 == dims.size();
    const double bound =
        output ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : std::sqrt(6.0 / fan_in);
    Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
    net.adam.first.push_back(zero_like(layer));
    net.adam.second.push_back(zero_like(layer));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

NetParams make_mlp(std::initializer_list<std::size_t> dims, Rng& rng) {
  return make_mlp(std::span<const std::size_t>(dims.begin(), dims.size()), rng);
}

Gradients zero_gradients(const NetParams& params) {
  Gradients g;
  g.reserve(params.layers.size());
  for (const auto& l : params.layers) g.push_back(zero_like(l));
  return g;
}

double leaky_relu(double x) { return x >= 0.0 ? x : kLeakySlope * x; }
double leaky_relu_grad(double x) { return x >= 0.0 ? 1.0 : kLeakySlope; }

Matrix mlp_forward(const NetParams& params, const Matrix& input, ForwardCache* cache) {
  if (params.layers.empty()) throw ConfigError("mlp_forward: empty network");
  if (static_cast<std::size_t>(input.cols()) != params.input_dim())
    throw ConfigError("mlp_forward: input has " + std::to_string(input.cols()) +
                      " columns, network expects " + std::to_string(params.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  const std::size_t n = params.layers.size();
  if (cache) cache->inputs.push_back(input);
  Matrix x;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = params.layers[i];
    Matrix z;
    z.noalias() = (i == 0 ? input : x) * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (i + 1 < n) {
      // Leaky ReLU with slope < 1 is max(z, slope·z).
      x = z.cwiseMax(kLeakySlope * z);
      if (cache) {
        cache->pre_activations.push_back(std::move(z));
        cache->inputs.push_back(x);
      }
    } else {
      x = std::move(z);
    }
  }
  return x;
}

Vector mlp_forward(const NetParams& params, const Vector& input) {
  Matrix row = input.transpose();
  Matrix out = mlp_forward(params, row, nullptr);
  return out.row(0).transpose();
}

BackwardResult mlp_backward(const NetParams& params, const ForwardCache& cache,
                            const Matrix& output_grad) {
  const std::size_t n = params.layers.size();
  if (cache.inputs.size() != n || cache.pre_activations.size() + 1 != n)
    throw UsageError("mlp_backward: no cached forward pass for this network");
  if (static_cast<std::size_t>(output_grad.cols()) != params.output_dim() ||
      output_grad.rows() != cache.inputs.front().rows())
    throw ConfigError("mlp_backward: output gradient shape mismatch");

  BackwardResult out;
  out.grads.resize(n);
  Matrix delta = output_grad;
  for (std::size_t k = n; k-- > 0;) {
    const auto& layer = params.layers[k];
    out.grads[k].weight.noalias() = delta.transpose() * cache.inputs[k];
    out.grads[k].bias = delta.colwise().sum().transpose();
    Matrix upstream;
    upstream.noalias() = delta * layer.weight;
    if (k > 0) {
      const Matrix& pre = cache.pre_activations[k - 1];
      delta.resize(upstream.rows(), upstream.cols());
      const double* p = pre.data();
      const double* u = upstream.data();
      double* d = delta.data();
      for (Eigen::Index i = 0; i < upstream.size(); ++i) {
        const double slope = p[i] >= 0.0 ? 1.0 : kLeakySlope;
        d[i] = slope * u[i];
      }
    } else {
      out.input_grad = std::move(upstream);
    }
  }
  return out;
}

void adam_step(NetParams& params, const Gradients& grads, double lr) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  check_grad_shape(params, grads);
  for (const auto& g : grads) {
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw DivergenceError("adam_step: non-finite gradient");
  }
  auto& st = params.adam;
  if (st.first.size() != params.layers.size()) {
    st.first.clear();
    st.second.clear();
    for (const auto& l : params.layers) {
      st.first.push_back(zero_like(l));
      st.second.push_back(zero_like(l));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, st.first[i].weight, st.second[i].weight, grads[i].weight);
    update(params.layers[i].bias, st.first[i].bias, st.second[i].bias, grads[i].bias);
  }
}

void polyak_update(NetParams& target, const NetParams& online, double alpha) {
  check_same_shape(target, online, "polyak_update");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    t.weight = (1.0 - alpha) * t.weight + alpha * o.weight;
    t.bias = (1.0 - alpha) * t.bias + alpha * o.bias;
  }
}

NetParams clone_parameters(const NetParams& params) {
  NetParams out;
  out.layers = params.layers;
  for (const auto& l : params.layers) {
    out.adam.first.push_back(zero_like(l));
    out.adam.second.push_back(zero_like(l));
  }
  return out;
}

Vector clipped_double_q(const Vector& q1, const Vector& q2) {
  if (q1.size() != q2.size()) throw ConfigError("clipped_double_q: size mismatch");
  return q1.cwiseMin(q2);
}

Matrix clipped_double_q(const Matrix& q1, const Matrix& q2) {
  if (q1.rows() != q2.rows() || q1.cols() != q2.cols())
    throw ConfigError("clipped_double_q: shape mismatch");
  return q1.cwiseMin(q2);
}

bool all_finite(const NetParams& params) {
  for (const auto& l : params.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

}  // namespace orl::nn
