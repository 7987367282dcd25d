#include "retouch/critic/critic.hpp"

#include <cmath>

#include "retouch/common/error.hpp"

namespace retouch::critic {

std::size_t CriticArch::final_size() const {
  std::size_t s = input_size;
  for (std::size_t i = 0; i < channels.size(); ++i) s = (s - 1) / 2 + 1;
  return s;
}

template <class T>
CriticNet<T>::CriticNet(const CriticArch& arch, Rng& rng) : arch_(arch) {
  if (arch.channels.empty()) throw InvalidArgument("critic needs at least one conv layer");
  std::size_t in = 3;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    const std::size_t out = arch.channels[i];
    const std::size_t fan_in = in * arch.kernel * arch.kernel;
    const std::string prefix = "critic/conv" + std::to_string(i);
    params_.add(prefix + ".weight",
                nn::he_uniform<T>({out, in, arch.kernel, arch.kernel}, fan_in, rng));
    params_.add(prefix + ".bias", nn::Tensor<T>::parameter({out}, std::vector<T>(out, T(0))));
    in = out;
  }
  const std::size_t flat = in * arch.final_size() * arch.final_size();
  params_.add("critic/out.weight", nn::he_uniform<T>({flat, 1}, flat, rng));
  params_.add("critic/out.bias", nn::Tensor<T>::parameter({1}, {T(0)}));
}

template <class T>
nn::Tensor<T> CriticNet<T>::forward(nn::Graph<T>& graph, const nn::Tensor<T>& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != arch_.input_size ||
      batch.dim(3) != arch_.input_size) {
    throw InvalidArgument("critic expects [N,3," + std::to_string(arch_.input_size) + "," +
                          std::to_string(arch_.input_size) + "], got " +
                          nn::shape_string(batch.shape()));
  }
  const auto& p = params_;
  nn::Tensor<T> h = batch;
  const std::size_t layers = arch_.channels.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = graph.conv2d(h, p.tensor(2 * i), p.tensor(2 * i + 1), 2);
    h = graph.leaky_relu(h, static_cast<T>(arch_.slope));
  }
  const std::size_t n = h.dim(0);
  h = graph.reshape(h, {n, h.size() / n});
  return graph.dense(h, p.tensor(2 * layers), p.tensor(2 * layers + 1));
}

template <class T>
double CriticNet<T>::score(const image::Image& img) const {
  return score_batch(std::span<const image::Image>(&img, 1)).front();
}

template <class T>
std::vector<double> CriticNet<T>::score_batch(std::span<const image::Image> imgs) const {
  for (const auto& img : imgs) {
    if (img.width() != arch_.input_size || img.height() != arch_.input_size) {
      throw InvalidArgument("critic scores " + std::to_string(arch_.input_size) + "x" +
                            std::to_string(arch_.input_size) + " images, got " +
                            std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
  }
  if (imgs.empty()) return {};
  nn::Graph<T> graph(nn::GradMode::NoGrad);
  const auto scores = forward(graph, images_to_tensor<T>(imgs));
  return {scores.values().begin(), scores.values().end()};
}

template <class T>
void CriticNet<T>::zero_output_layer() {
  const std::size_t layers = arch_.channels.size();
  for (auto& v : params_.tensor(2 * layers).values()) v = T(0);
  for (auto& v : params_.tensor(2 * layers + 1).values()) v = T(0);
}

template <class T>
void CriticNet<T>::export_to(nn::Checkpoint& ckpt) const {
  nn::export_params(params_, ckpt);
}

template <class T>
void CriticNet<T>::import_from(const nn::Checkpoint& ckpt) {
  nn::import_params(params_, ckpt);
}

template <class T>
nn::Tensor<T> images_to_tensor(std::span<const image::Image> imgs, bool requires_grad) {
  if (imgs.empty()) throw InvalidArgument("images_to_tensor: empty batch");
  const std::size_t w = imgs.front().width(), h = imgs.front().height();
  std::vector<T> values;
  values.reserve(imgs.size() * 3 * w * h);
  for (const auto& img : imgs) {
    if (img.width() != w || img.height() != h) {
      throw InvalidArgument("images_to_tensor: images in a batch must share one size");
    }
    const auto planar = image::to_planar(img);
    values.insert(values.end(), planar.begin(), planar.end());
  }
  return nn::Tensor<T>::from({imgs.size(), 3, h, w}, std::move(values), requires_grad);
}

image::Image interpolate(const image::Image& y, const image::Image& y_prime, double eps) {
  if (!y.same_size(y_prime)) throw InvalidArgument("interpolate: image size mismatch");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidArgument("interpolate: eps must lie in [0,1]");
  std::vector<float> out(y.data().size());
  const auto a = y.data(), b = y_prime.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = eps * a[i] + (1.0 - eps) * b[i];
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return image::Image::from_pixels(y.width(), y.height(), std::move(out));
}

namespace {

template <class T>
std::vector<double> random_unit(std::size_t n, Rng& rng) {
  std::vector<double> u(n);
  double norm2 = 0;
  do {
    norm2 = 0;
    for (auto& v : u) {
      v = rng.normal();
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : u) v *= inv;
  return u;
}

// Probe directions, sample-major: probes of sample i occupy rows [i*R, (i+1)*R).
template <class T>
std::vector<double> probe_directions(const ScoreFn<T>& score, const nn::Tensor<T>& x,
                                     const GpOptions& options, Rng& rng, std::size_t& probes) {
  const std::size_t n = x.dim(0);
  const std::size_t dim = x.size() / n;
  std::vector<double> dirs;
  if (options.directions == GpDirections::Random) {
    probes = options.random_probes;
    if (probes == 0) throw InvalidArgument("gradient penalty needs at least one probe");
    dirs.reserve(n * probes * dim);
    for (std::size_t i = 0; i < n * probes; ++i) {
      const auto u = random_unit<T>(dim, rng);
      dirs.insert(dirs.end(), u.begin(), u.end());
    }
    return dirs;
  }
  probes = 1;
  nn::Graph<T> graph(nn::GradMode::FrozenParams);
  auto input = nn::Tensor<T>::from(x.shape(), {x.values().begin(), x.values().end()}, true);
  const auto scores = score(graph, input);
  graph.backward(graph.sum(scores));
  dirs.resize(n * dim, 0.0);
  if (!input.has_grad()) input.ensure_grad();
  const auto grad = input.grad();
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double g = grad[i * dim + j];
      norm2 += g * g;
    }
    if (norm2 < 1e-30) {
      const auto u = random_unit<T>(dim, rng);
      std::copy(u.begin(), u.end(), dirs.begin() + static_cast<std::ptrdiff_t>(i * dim));
      continue;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < dim; ++j) dirs[i * dim + j] = grad[i * dim + j] * inv;
  }
  return dirs;
}

}  // namespace

template <class T>
nn::Tensor<T> gradient_penalty_term(nn::Graph<T>& graph, const ScoreFn<T>& score,
                                    const nn::Tensor<T>& interpolates, const GpOptions& options,
                                    Rng& rng, std::vector<double>* norms) {
  if (interpolates.rank() < 2 || interpolates.dim(0) == 0) {
    throw InvalidArgument("gradient penalty needs a nonempty batch");
  }
  if (!(options.step > 0)) throw InvalidArgument("gradient penalty step must be positive");
  const std::size_t n = interpolates.dim(0);
  const std::size_t dim = interpolates.size() / n;
  std::size_t probes = 0;
  const auto dirs = probe_directions<T>(score, interpolates, options, rng, probes);
  const std::size_t rows = n * probes;

  nn::Shape shape = interpolates.shape();
  shape[0] = 2 * rows;
  std::vector<T> shifted(2 * rows * dim);
  const auto base = interpolates.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t sample = r / probes;
    for (std::size_t j = 0; j < dim; ++j) {
      const double offset = options.step * dirs[r * dim + j];
      shifted[r * dim + j] = static_cast<T>(base[sample * dim + j] + offset);
      shifted[(rows + r) * dim + j] = static_cast<T>(base[sample * dim + j] - offset);
    }
  }
  const auto scores = score(graph, nn::Tensor<T>::from(std::move(shape), std::move(shifted)));
  auto slope = graph.scale(graph.sub(graph.rows(scores, 0, rows), graph.rows(scores, rows, 2 * rows)),
                           static_cast<T>(1.0 / (2.0 * options.step)));
  nn::Tensor<T> norm;
  if (probes == 1) {
    norm = slope;
  } else {
    auto sq = graph.reshape(graph.square(slope), {n, probes});
    const auto ones = nn::Tensor<T>::from({probes, 1}, std::vector<T>(probes, T(1)));
    const auto zero = nn::Tensor<T>::from({1}, {T(0)});
    auto sumsq = graph.dense(sq, ones, zero);
    norm = graph.sqrt(graph.add_scalar(
        graph.scale(sumsq, static_cast<T>(static_cast<double>(dim) / static_cast<double>(probes))),
        static_cast<T>(1e-12)));
  }
  if (norms) norms->assign(norm.values().begin(), norm.values().end());
  return graph.mean(graph.square(graph.add_scalar(norm, T(-1))));
}

template <class T>
GpEstimate gradient_penalty(const ScoreFn<T>& score, const nn::Tensor<T>& interpolates,
                            const GpOptions& options, Rng& rng) {
  nn::Graph<T> graph(nn::GradMode::NoGrad);
  GpEstimate est;
  const auto z = gradient_penalty_term<T>(graph, score, interpolates, options, rng, &est.grad_norms);
  est.z = z.item();
  return est;
}

double critic_loss(std::span<const double> scores_real, std::span<const double> scores_fake,
                   double z, double lambda) {
  if (scores_real.empty() || scores_fake.empty()) {
    throw InvalidArgument("critic_loss: empty batch");
  }
  if (scores_real.size() != scores_fake.size()) {
    throw InvalidArgument("critic_loss: real and fake batches differ in size");
  }
  double real = 0, fake = 0;
  for (double s : scores_real) real += s;
  for (double s : scores_fake) fake += s;
  return -real / static_cast<double>(scores_real.size()) +
         fake / static_cast<double>(scores_fake.size()) + lambda * z;
}

template class CriticNet<float>;
template class CriticNet<double>;
template nn::Tensor<float> images_to_tensor<float>(std::span<const image::Image>, bool);
template nn::Tensor<double> images_to_tensor<double>(std::span<const image::Image>, bool);
template nn::Tensor<float> gradient_penalty_term<float>(nn::Graph<float>&, const ScoreFn<float>&,
                                                        const nn::Tensor<float>&, const GpOptions&,
                                                        Rng&, std::vector<double>*);
template nn::Tensor<double> gradient_penalty_term<double>(nn::Graph<double>&,
                                                          const ScoreFn<double>&,
                                                          const nn::Tensor<double>&,
                                                          const GpOptions&, Rng&,
                                                          std::vector<double>*);
template GpEstimate gradient_penalty<float>(const ScoreFn<float>&, const nn::Tensor<float>&,
                                            const GpOptions&, Rng&);
template GpEstimate gradient_penalty<double>(const ScoreFn<double>&, const nn::Tensor<double>&,
                                             const GpOptions&, Rng&);

}  // namespace retouch::critic
