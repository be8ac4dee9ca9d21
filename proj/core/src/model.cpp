#include "hrrpgnet/model.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "hrrpgnet/error.hpp"
#include "hrrpgnet/serialize.hpp"
#include "parallel.hpp"

namespace hrrpgnet {

// ---------------------------------------------------------------------------
// Configuration

std::string AblationConfig::code() const {
  std::string out;
  if (local_conv) out += 'a';
  if (graph_conv) out += 'b';
  if (attention) out += 'c';
  return out;
}

AblationConfig AblationConfig::parse(std::string_view code) {
  AblationConfig cfg{false, false, false};
  for (char ch : code) {
    bool* slot = nullptr;
    switch (ch) {
      case 'a': slot = &cfg.local_conv; break;
      case 'b': slot = &cfg.graph_conv; break;
      case 'c': slot = &cfg.attention; break;
      default:
        throw ConfigError("ablation: unknown module '" + std::string(1, ch) +
                          "' in \"" + std::string(code) + "\" (expected a subset of \"abc\")");
    }
    if (*slot) throw ConfigError("ablation: module '" + std::string(1, ch) + "' listed twice");
    *slot = true;
  }
  cfg.validate();
  return cfg;
}

std::array<AblationConfig, 7> AblationConfig::table_rows() {
  return {{{true, false, false},
           {false, true, false},
           {false, false, true},
           {true, true, false},
           {true, false, true},
           {false, true, true},
           {true, true, true}}};
}

void AblationConfig::validate() const {
  if (!local_conv && !graph_conv && !attention) {
    throw ConfigError("ablation: at least one of local_conv (a), graph_conv (b), attention (c) "
                      "must be enabled");
  }
}

void ModelConfig::validate() const {
  if (cells < 3) {
    throw ConfigError("cells (N) = " + std::to_string(cells) +
                      " is smaller than the conv kernel width 3");
  }
  if (conv_channels < 1) throw ConfigError("conv_channels (D_out) must be >= 1");
  if (graph_channels < 1) throw ConfigError("graph_channels (G_out) must be >= 1");
  if (classes < 1) throw ConfigError("classes (C) must be >= 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ConfigError("leaky_slope must be in (0, 1)");
  }
  if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) {
    throw ConfigError("bn_momentum must be in (0, 1)");
  }
  ablation.validate();
}

std::size_t ModelConfig::graph_input_channels() const {
  return ablation.local_conv ? conv_channels : 1;
}

std::size_t ModelConfig::head_features() const {
  if (ablation.graph_conv) return graph_channels;
  return ablation.local_conv ? conv_channels : 1;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

LayerTensors zero_tensors(const ModelConfig& c) {
  return LayerTensors{
      Conv1dParams::zeros(1, c.conv_channels),
      BatchNormParams::make(c.conv_channels, c.bn_eps, c.bn_momentum),
      Conv1dParams::zeros(c.conv_channels, c.conv_channels),
      BatchNormParams::make(c.conv_channels, c.bn_eps, c.bn_momentum),
      GraphConvParams::zeros(c.graph_input_channels(), c.graph_channels, c.cells,
                             c.shared_graph_bias),
      AttentionParams::zeros(c.head_features()),
      DenseParams::zeros(c.head_features(), c.classes),
  };
}

template <typename Tensors, typename Fn>
void visit_trainable(Tensors& t, Fn&& fn) {
  fn("conv1.kernels", t.conv1.kernels);
  fn("conv1.bias", t.conv1.bias);
  fn("bn1.gamma", t.bn1.gamma);
  fn("bn1.beta", t.bn1.beta);
  fn("conv2.kernels", t.conv2.kernels);
  fn("conv2.bias", t.conv2.bias);
  fn("bn2.gamma", t.bn2.gamma);
  fn("bn2.beta", t.bn2.beta);
  fn("gconv.w1", t.gconv.w1);
  fn("gconv.w2", t.gconv.w2);
  fn("gconv.bias", t.gconv.bias);
  fn("att.weight", t.att.weight);
  fn("att.bias", t.att.bias);
  fn("fc.weight", t.fc.weight);
  fn("fc.bias", t.fc.bias);
}

template <typename Tensors, typename Fn>
void visit_all(Tensors& t, Fn&& fn) {
  visit_trainable(t, fn);
  fn("bn1.running_mean", t.bn1.running_mean);
  fn("bn1.running_var", t.bn1.running_var);
  fn("bn2.running_mean", t.bn2.running_mean);
  fn("bn2.running_var", t.bn2.running_var);
}

void fill_uniform(Matrix& m, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : m.values()) v = dist(rng);
}

}  // namespace

std::vector<TensorRef> ModelParams::trainable() {
  std::vector<TensorRef> refs;
  std::vector<Matrix*> grads;
  visit_trainable(grad, [&](std::string_view, Matrix& m) { grads.push_back(&m); });
  std::size_t i = 0;
  visit_trainable(value, [&](std::string_view name, Matrix& m) {
    refs.push_back({name, &m, grads[i++]});
  });
  return refs;
}

std::vector<ConstTensorRef> ModelParams::all_tensors() const {
  std::vector<ConstTensorRef> refs;
  visit_all(value, [&](std::string_view name, const Matrix& m) { refs.push_back({name, &m}); });
  return refs;
}

Matrix& ModelParams::tensor(std::string_view name) {
  Matrix* found = nullptr;
  visit_all(value, [&](std::string_view n, Matrix& m) {
    if (n == name) found = &m;
  });
  if (!found) throw UsageError("no tensor named \"" + std::string(name) + "\"");
  return *found;
}

void ModelParams::zero_grad() {
  visit_trainable(grad, [](std::string_view, Matrix& m) { m.fill(0.0); });
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p{zero_tensors(config), zero_tensors(config), 0};
  p.zero_grad();
  std::mt19937_64 rng(config.seed);
  LayerTensors& t = p.value;
  fill_uniform(t.conv1.kernels, 1 * 3, rng);
  fill_uniform(t.conv2.kernels, config.conv_channels * 3, rng);
  fill_uniform(t.gconv.w1, config.graph_input_channels(), rng);
  fill_uniform(t.gconv.w2, config.graph_input_channels(), rng);
  fill_uniform(t.att.weight, config.head_features(), rng);
  fill_uniform(t.fc.weight, config.head_features(), rng);
  return p;
}

void validate_params(const ModelParams& params, const ModelConfig& config) {
  const LayerTensors expected = zero_tensors(config);
  std::vector<std::pair<std::string_view, const Matrix*>> want;
  visit_all(expected, [&](std::string_view n, const Matrix& m) { want.emplace_back(n, &m); });
  std::size_t i = 0;
  visit_all(params.value, [&](std::string_view name, const Matrix& m) {
    const Matrix& w = *want[i++].second;
    if (!m.same_shape(w)) {
      throw ShapeError("tensor " + std::string(name) + " has shape " + m.shape_string() +
                       ", config expects " + w.shape_string());
    }
  });
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void require_sample_shape(const HrrpSample& s, const ModelConfig& config) {
  if (s.cells() != config.cells) {
    throw ShapeError("sample has " + std::to_string(s.cells()) + " range cells, model expects " +
                     std::to_string(config.cells));
  }
}

// Conv -> BN -> LeakyReLU over the whole batch.
std::vector<Matrix> conv_block(const std::vector<Matrix>& inputs, const Conv1dParams& conv,
                               const BatchNormParams& bn, bool training, double slope,
                               std::vector<Conv1dCache>* conv_caches, BatchNormCache* bn_cache,
                               std::vector<Matrix>* pre_act) {
  std::vector<Matrix> conv_out;
  conv_out.reserve(inputs.size());
  if (conv_caches) conv_caches->assign(inputs.size(), {});
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    conv_out.push_back(conv1d_forward(inputs[b], conv, conv_caches ? &(*conv_caches)[b] : nullptr));
  }
  std::vector<Matrix> normalized = batchnorm_forward(conv_out, bn, training, bn_cache);
  std::vector<Matrix> out;
  out.reserve(normalized.size());
  for (const Matrix& m : normalized) out.push_back(leaky_relu(m, slope));
  if (pre_act) *pre_act = std::move(normalized);
  return out;
}

}  // namespace

BatchForward forward_batch(std::span<const HrrpSample> samples, const ModelParams& params,
                           const ModelConfig& config, bool training) {
  config.validate();
  if (samples.empty()) throw UsageError("forward: empty batch");
  for (const HrrpSample& s : samples) require_sample_shape(s, config);
  validate_params(params, config);

  const LayerTensors& t = params.value;
  const AblationConfig& ab = config.ablation;
  const std::size_t batch = samples.size();

  BatchForward result;
  ForwardCache& cache = result.cache;
  cache.training = training;
  cache.config = config;
  cache.samples.resize(batch);

  // Node features entering the graph stage.
  std::vector<Matrix> features;
  features.reserve(batch);
  for (const HrrpSample& s : samples) features.push_back(Matrix::row(s.amplitudes));
  if (ab.local_conv) {
    features = conv_block(features, t.conv1, t.bn1, training, config.leaky_slope, &cache.conv1,
                          &cache.bn1, &cache.pre_act1);
    features = conv_block(features, t.conv2, t.bn2, training, config.leaky_slope, &cache.conv2,
                          &cache.bn2, &cache.pre_act2);
  }

  std::shared_ptr<const Matrix> kernel;
  if (ab.graph_conv) kernel = std::make_shared<const Matrix>(distance_kernel(config.cells));

  result.log_probs.resize(batch);
  detail::parallel_for(batch, [&](std::size_t b) {
    SampleCache& sc = cache.samples[b];
    sc.cells = config.cells;
    Matrix nodes = std::move(features[b]);
    if (ab.graph_conv) {
      sc.adjacency.emplace(samples[b].amplitudes, kernel);
      nodes = graphconv_forward(nodes, *sc.adjacency, t.gconv, &sc.gconv);
    }
    std::vector<double> pooled =
        ab.attention ? attention_pool(nodes, t.att, &sc.att) : mean_pool(nodes);
    sc.head_input = std::move(nodes);
    const std::vector<double> logits = dense_forward(pooled, t.fc, &sc.fc);
    sc.log_probs = log_softmax(logits);
    result.log_probs[b] = sc.log_probs;
  });

  cache.valid = true;
  return result;
}

ForwardResult forward(const HrrpSample& sample, const ModelParams& params,
                      const ModelConfig& config, bool training) {
  BatchForward batch = forward_batch(std::span<const HrrpSample>(&sample, 1), params, config,
                                     training);
  return {std::move(batch.log_probs.front()), std::move(batch.cache)};
}

double loss(std::span<const double> log_probs, std::size_t label) {
  if (label >= log_probs.size()) {
    throw UsageError("loss: label " + std::to_string(label) + " out of range for " +
                     std::to_string(log_probs.size()) + " classes");
  }
  return -log_probs[label];
}

double batch_loss(std::span<const std::vector<double>> log_probs,
                  std::span<const std::size_t> labels) {
  if (log_probs.size() != labels.size() || labels.empty()) {
    throw UsageError("batch_loss: " + std::to_string(log_probs.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) total += loss(log_probs[b], labels[b]);
  return total / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Backward

namespace {

struct SampleGrads {
  Matrix d_nodes;  // gradient w.r.t. the node features entering the graph stage
  DenseParams fc;
  AttentionParams att;
  GraphConvParams gconv;
};

void add_into(Matrix& dst, const Matrix& src) { dst += src; }

// Reverse of conv_block; returns gradient w.r.t. the block input.
std::vector<Matrix> conv_block_backward(const std::vector<Matrix>& upstream,
                                        const std::vector<Conv1dCache>& conv_caches,
                                        const BatchNormCache& bn_cache,
                                        const std::vector<Matrix>& pre_act, double slope,
                                        const Conv1dParams& conv, const BatchNormParams& bn,
                                        Conv1dParams& d_conv, BatchNormParams& d_bn) {
  std::vector<Matrix> d_pre;
  d_pre.reserve(upstream.size());
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    d_pre.push_back(leaky_relu_backward(pre_act[b], upstream[b], slope));
  }
  BatchNormBackward bn_grads = batchnorm_backward(bn_cache, bn, d_pre);
  add_into(d_bn.gamma, bn_grads.d_gamma);
  add_into(d_bn.beta, bn_grads.d_beta);

  std::vector<Matrix> d_in;
  d_in.reserve(upstream.size());
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    Conv1dBackward cg = conv1d_backward(conv_caches[b], conv, bn_grads.d_input[b]);
    add_into(d_conv.kernels, cg.d_params.kernels);
    add_into(d_conv.bias, cg.d_params.bias);
    d_in.push_back(std::move(cg.d_input));
  }
  return d_in;
}

}  // namespace

void backward(const ForwardCache& cache, std::span<const std::size_t> labels,
              ModelParams& params) {
  if (!cache.valid) throw UsageError("backward: cache does not hold a forward pass");
  if (labels.size() != cache.samples.size()) {
    throw UsageError("backward: " + std::to_string(labels.size()) + " labels for a cached batch of " +
                     std::to_string(cache.samples.size()));
  }
  const ModelConfig& config = cache.config;
  try {
    validate_params(params, config);
  } catch (const ShapeError& e) {
    throw UsageError(std::string("backward: parameters do not match the cached forward: ") +
                     e.what());
  }
  for (std::size_t label : labels) {
    if (label >= config.classes) {
      throw UsageError("backward: label " + std::to_string(label) + " out of range for " +
                       std::to_string(config.classes) + " classes");
    }
  }

  const LayerTensors& t = params.value;
  const AblationConfig& ab = config.ablation;
  const std::size_t batch = labels.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  std::vector<SampleGrads> per_sample(batch);
  detail::parallel_for(batch, [&](std::size_t b) {
    const SampleCache& sc = cache.samples[b];
    SampleGrads& g = per_sample[b];

    // d(-log p_label)/d logits = softmax(logits) - onehot, scaled for the batch mean.
    std::vector<double> d_logits(sc.log_probs.size());
    for (std::size_t k = 0; k < d_logits.size(); ++k) {
      d_logits[k] = (std::exp(sc.log_probs[k]) - (k == labels[b] ? 1.0 : 0.0)) * inv_batch;
    }
    DenseBackward dense = dense_backward(sc.fc, t.fc, d_logits);
    g.fc = std::move(dense.d_params);

    Matrix d_head(1, 1);
    if (ab.attention) {
      AttentionBackward att = attention_backward(sc.att, t.att, dense.d_input);
      g.att = std::move(att.d_params);
      d_head = std::move(att.d_input);
    } else {
      d_head = mean_pool_backward(sc.head_input.cols(), dense.d_input);
    }

    if (ab.graph_conv) {
      if (!sc.adjacency) throw UsageError("backward: missing cached adjacency");
      GraphConvBackward gc = graphconv_backward(sc.gconv, *sc.adjacency, t.gconv, d_head);
      g.gconv = std::move(gc.d_params);
      g.d_nodes = std::move(gc.d_input);
    } else {
      g.d_nodes = std::move(d_head);
    }
  });

  params.zero_grad();
  LayerTensors& grad = params.grad;
  for (const SampleGrads& g : per_sample) {
    add_into(grad.fc.weight, g.fc.weight);
    add_into(grad.fc.bias, g.fc.bias);
    if (ab.attention) {
      add_into(grad.att.weight, g.att.weight);
      add_into(grad.att.bias, g.att.bias);
    }
    if (ab.graph_conv) {
      add_into(grad.gconv.w1, g.gconv.w1);
      add_into(grad.gconv.w2, g.gconv.w2);
      add_into(grad.gconv.bias, g.gconv.bias);
    }
  }

  if (ab.local_conv) {
    std::vector<Matrix> upstream;
    upstream.reserve(batch);
    for (SampleGrads& g : per_sample) upstream.push_back(std::move(g.d_nodes));
    upstream = conv_block_backward(upstream, cache.conv2, cache.bn2, cache.pre_act2,
                                   config.leaky_slope, t.conv2, t.bn2, grad.conv2, grad.bn2);
    conv_block_backward(upstream, cache.conv1, cache.bn1, cache.pre_act1, config.leaky_slope,
                        t.conv1, t.bn1, grad.conv1, grad.bn1);
  }
}

void apply_running_stats(const ForwardCache& cache, ModelParams& params) {
  if (!cache.valid || !cache.training || !cache.config.ablation.local_conv) return;
  batchnorm_update_running_stats(params.value.bn1, cache.bn1);
  batchnorm_update_running_stats(params.value.bn2, cache.bn2);
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t predict(const HrrpSample& sample, const ModelParams& params,
                    const ModelConfig& config) {
  return argmax(forward(sample, params, config, false).log_probs);
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {
constexpr const char* kCheckpointFormat = "hrrpgnet-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params) {
  validate_params(params, config);
  nlohmann::json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = config;
  doc["step"] = params.step;
  nlohmann::json tensors = nlohmann::json::array();
  for (const ConstTensorRef& ref : params.all_tensors()) {
    nlohmann::json t;
    t["name"] = ref.name;
    t["rows"] = ref.value->rows();
    t["cols"] = ref.value->cols();
    t["data"] = std::vector<double>(ref.value->values().begin(), ref.value->values().end());
    tensors.push_back(std::move(t));
  }
  doc["tensors"] = std::move(tensors);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw FormatError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw FormatError("not a checkpoint file: " + path.string());
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version in " + path.string());
    }
    Checkpoint ck{doc.at("config").get<ModelConfig>(), {}};
    ck.config.validate();
    ck.params = init_params(ck.config);
    ck.params.step = doc.at("step").get<std::uint64_t>();
    std::size_t seen = 0;
    for (const auto& t : doc.at("tensors")) {
      Matrix& dst = ck.params.tensor(t.at("name").get<std::string>());
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      auto data = t.at("data").get<std::vector<double>>();
      Matrix loaded(rows, cols, std::move(data));
      if (!loaded.same_shape(dst)) {
        throw FormatError("checkpoint tensor " + t.at("name").get<std::string>() + " has shape " +
                          loaded.shape_string() + ", config expects " + dst.shape_string());
      }
      dst = std::move(loaded);
      ++seen;
    }
    if (seen != ck.params.all_tensors().size()) {
      throw FormatError("checkpoint " + path.string() + " is missing tensors");
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw FormatError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace hrrpgnet
