#include "cycledance/model.hpp"

#include <cmath>
#include <sstream>

#include "cycledance/data.hpp"

namespace cycledance {

void ArchConfig::validate() const {
  if (base_channels < 4 || base_channels % 4 != 0)
    throw ValidationError("arch: base_channels must be a positive multiple of 4");
  if (n_down_blocks != 2)
    throw ValidationError("arch: exactly two downsampling stages are supported");
  if (transformer.model_dim == 0 || transformer.heads == 0 ||
      transformer.model_dim % transformer.heads != 0)
    throw ValidationError("arch: model_dim must be divisible by heads");
  if (transformer.ff_dim == 0 || motion_dim == 0 || music_dim == 0)
    throw ValidationError("arch: dims must be positive");
}

std::string ArchConfig::canonical_string() const {
  std::ostringstream os;
  os << "base=" << base_channels << ";down=" << n_down_blocks
     << ";res=" << n_res_blocks << ";tx=" << transformer.layers << ","
     << transformer.heads << "," << transformer.model_dim << "," << transformer.ff_dim
     << ";motion_tx=" << use_motion_transformer << ";music=" << use_music_pathway
     << ";dims=" << motion_dim << "," << music_dim;
  return os.str();
}

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return tensor(std::move(shape), std::move(data), true);
}

/// Bias add for conv activations of any rank: flattens channels x rest.
Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  std::size_t c = x.dim(0);
  std::size_t rest = x.size() / c;
  Tensor flat = reshape(x, {c, rest});
  return reshape(add_colvec(flat, b), x.shape());
}

Tensor split_glu_channels(const Tensor& x) {
  std::size_t c2 = x.dim(0);
  Tensor a = narrow(x, 0, 0, c2 / 2);
  Tensor g = narrow(x, 0, c2 / 2, c2 / 2);
  return glu(a, g);
}

}  // namespace

namespace nn {

void LayerNorm::init(std::size_t dim) {
  gain = full({dim}, 1.0, true);
  bias = zeros({dim}, true);
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNorm::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

void ChannelNorm::init(std::size_t channels) { ln.init(channels); }

Tensor ChannelNorm::forward(const Tensor& x) const {
  std::size_t c = x.dim(0);
  std::size_t rest = x.size() / c;
  Tensor positions = transpose2d(reshape(x, {c, rest}));  // [positions, C]
  Tensor normed = ln.forward(positions);
  return reshape(transpose2d(normed), x.shape());
}

void ChannelNorm::collect(const std::string& prefix, std::vector<Param>& out) const {
  ln.collect(prefix + ".norm", out);
}

void Conv2dGlu::init(std::size_t cin, std::size_t cout, std::size_t k,
                     std::size_t stride_, std::size_t pad_, Rng& rng) {
  stride = stride_;
  pad = pad_;
  w = uniform_init({2 * cout, cin, k, k}, cin * k * k, rng);
  b = zeros({2 * cout}, true);
  norm.init(cout);
}

Tensor Conv2dGlu::forward(const Tensor& x) const {
  Tensor y = conv2d(x, w, stride, stride, pad, pad);
  return norm.forward(split_glu_channels(add_channel_bias(y, b)));
}

void Conv2dGlu::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
  norm.collect(prefix, out);
}

void Conv2dLayer::init(std::size_t cin, std::size_t cout, std::size_t k,
                       std::size_t stride_, std::size_t pad_, Rng& rng) {
  stride = stride_;
  pad = pad_;
  w = uniform_init({cout, cin, k, k}, cin * k * k, rng);
  b = zeros({cout}, true);
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return add_channel_bias(conv2d(x, w, stride, stride, pad, pad), b);
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

void Conv1dGlu::init(std::size_t cin, std::size_t cout, std::size_t k,
                     std::size_t stride_, std::size_t pad_, Rng& rng) {
  stride = stride_;
  pad = pad_;
  w = uniform_init({2 * cout, cin, k}, cin * k, rng);
  b = zeros({2 * cout}, true);
  norm.init(cout);
}

Tensor Conv1dGlu::forward(const Tensor& x) const {
  Tensor y = conv1d(x, w, stride, pad);
  return norm.forward(split_glu_channels(add_channel_bias(y, b)));
}

void Conv1dGlu::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
  norm.collect(prefix, out);
}

void Conv1dLayer::init(std::size_t cin, std::size_t cout, std::size_t k,
                       std::size_t stride_, std::size_t pad_, Rng& rng) {
  stride = stride_;
  pad = pad_;
  w = uniform_init({cout, cin, k}, cin * k, rng);
  b = zeros({cout}, true);
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  return add_channel_bias(conv1d(x, w, stride, pad), b);
}

void Conv1dLayer::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

void Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  w = uniform_init({in, out}, in, rng);
  b = zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }

void Linear::collect(const std::string& prefix, std::vector<Param>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

void MultiHeadAttention::init(std::size_t dim, std::size_t heads_, Rng& rng) {
  heads = heads_;
  q.init(dim, dim, rng);
  k.init(dim, dim, rng);
  v.init(dim, dim, rng);
  o.init(dim, dim, rng);
}

Tensor MultiHeadAttention::forward(const Tensor& x) const {
  const std::size_t d = x.dim(1);
  const std::size_t hd = d / heads;
  Tensor qs = q.forward(x), ks = k.forward(x), vs = v.forward(x);
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = narrow(qs, 1, h * hd, hd);
    Tensor kh = narrow(ks, 1, h * hd, hd);
    Tensor vh = narrow(vs, 1, h * hd, hd);
    Tensor scores = mul_scalar(matmul(qh, transpose2d(kh)), scale);
    Tensor weights = softmax(scores, 1);
    head_outs.push_back(matmul(weights, vh));
  }
  return o.forward(concat(head_outs, 1));
}

void MultiHeadAttention::collect(const std::string& prefix, std::vector<Param>& out) const {
  q.collect(prefix + ".q", out);
  k.collect(prefix + ".k", out);
  v.collect(prefix + ".v", out);
  o.collect(prefix + ".o", out);
}

void TransformerLayer::init(const TransformerConfig& cfg, Rng& rng) {
  attn.init(cfg.model_dim, cfg.heads, rng);
  ff1.init(cfg.model_dim, 2 * cfg.ff_dim, rng);
  ff2.init(cfg.ff_dim, cfg.model_dim, rng);
  ln1.init(cfg.model_dim);
  ln2.init(cfg.model_dim);
}

Tensor TransformerLayer::forward(const Tensor& x) const {
  Tensor a = ln1.forward(add(x, attn.forward(x)));
  Tensor h = ff1.forward(a);
  std::size_t ff = h.dim(1) / 2;
  Tensor gated = glu(narrow(h, 1, 0, ff), narrow(h, 1, ff, ff));
  return ln2.forward(add(a, ff2.forward(gated)));
}

void TransformerLayer::collect(const std::string& prefix, std::vector<Param>& out) const {
  attn.collect(prefix + ".attn", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
  ln1.collect(prefix + ".ln1", out);
  ln2.collect(prefix + ".ln2", out);
}

void TransformerEncoder::init(const TransformerConfig& cfg, Rng& rng) {
  layers.resize(cfg.layers);
  for (auto& l : layers) l.init(cfg, rng);
}

Tensor TransformerEncoder::forward(const Tensor& tokens) const {
  Tensor x = tokens;
  if (add_position_embedding)
    x = add(x, position_embedding(tokens.dim(0), tokens.dim(1)));
  for (const auto& l : layers) x = l.forward(x);
  return x;
}

void TransformerEncoder::collect(const std::string& prefix, std::vector<Param>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
}

Tensor position_embedding(std::size_t t_len, std::size_t dim) {
  std::vector<double> pe(t_len * dim);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t d = 0; d < dim; ++d) {
      double exponent = static_cast<double>(2 * (d / 2)) / static_cast<double>(dim);
      double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pe[t * dim + d] = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return tensor({t_len, dim}, std::move(pe));
}

}  // namespace nn

// ---- pathway encoder ---------------------------------------------------------

namespace {

std::size_t conv_down_out(std::size_t in) { return (in + 4 - 5) / 2 + 1; }  // k5 s2 p2

struct ChannelPlan {
  std::size_t c0, c1, c2;
};

ChannelPlan plan_channels(const ArchConfig& cfg) {
  return {std::max<std::size_t>(2, cfg.base_channels / 4), cfg.base_channels / 2,
          cfg.base_channels};
}

}  // namespace

void PathwayEncoder::init(std::size_t feat_dim_, const ArchConfig& cfg,
                          bool use_transformer_, Rng& rng) {
  feat_dim = feat_dim_;
  use_transformer = use_transformer_;
  auto [c0, c1, c2] = plan_channels(cfg);
  conv_in.init(1, c0, 5, 1, 2, rng);
  downs.resize(2);
  downs[0].init(c0, c1, 5, 2, 2, rng);
  downs[1].init(c1, c2, 5, 2, 2, rng);
  reduced_h = conv_down_out(conv_down_out(feat_dim));
  to_1d.init(c2 * reduced_h, cfg.transformer.model_dim, 1, 1, 0, rng);
  res_blocks.resize(cfg.n_res_blocks);
  for (auto& r : res_blocks)
    r.init(cfg.transformer.model_dim, cfg.transformer.model_dim, 3, 1, 1, rng);
  if (use_transformer) transformer.init(cfg.transformer, rng);
}

Tensor PathwayEncoder::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != feat_dim)
    throw ValidationError("pathway: expected [T," + std::to_string(feat_dim) +
                          "], got " + shape_str(x.shape()));
  const std::size_t t_len = x.dim(0);
  if (t_len < 16 || t_len % 4 != 0)
    throw ValidationError(
        "pathway: sequence length must be >= 16 and divisible by 4 (pad the clip "
        "first), got " + std::to_string(t_len));
  // [T, F] -> [1, F, T]
  Tensor img = reshape(transpose2d(x), {1, feat_dim, t_len});
  Tensor h = conv_in.forward(img);
  for (const auto& down : downs) h = down.forward(h);
  // 2D -> 1D: stack the feature axis into channels.
  Tensor flat = reshape(h, {h.dim(0) * h.dim(1), h.dim(2)});
  Tensor seq = to_1d.forward(flat);
  for (const auto& r : res_blocks) seq = add(seq, r.forward(seq));
  Tensor tokens = transpose2d(seq);  // [T/4, D]
  if (use_transformer) tokens = transformer.forward(tokens);
  return tokens;
}

void PathwayEncoder::collect(const std::string& prefix, std::vector<Param>& out) const {
  conv_in.collect(prefix + ".conv_in", out);
  for (std::size_t i = 0; i < downs.size(); ++i)
    downs[i].collect(prefix + ".down" + std::to_string(i), out);
  to_1d.collect(prefix + ".to_1d", out);
  for (std::size_t i = 0; i < res_blocks.size(); ++i)
    res_blocks[i].collect(prefix + ".res" + std::to_string(i), out);
  if (use_transformer) transformer.collect(prefix + ".transformer", out);
}

// ---- generator -----------------------------------------------------------------

void Generator::init(const ArchConfig& cfg, Rng& rng) {
  cfg.validate();
  arch = cfg;
  auto [c0, c1, c2] = plan_channels(cfg);
  motion_path.init(cfg.motion_dim, cfg, cfg.use_motion_transformer, rng);
  if (cfg.use_music_pathway) {
    music_path.init(cfg.music_dim, cfg, true, rng);
    cross_transformer.init(cfg.transformer, rng);
    cross_transformer.add_position_embedding = false;  // tokens already carry PE
    std::vector<double> emb(2 * cfg.transformer.model_dim);
    for (double& v : emb) v = rng.uniform(-0.1, 0.1);
    modality_embedding = tensor({2, cfg.transformer.model_dim}, std::move(emb), true);
  }
  const std::size_t h2 = motion_path.reduced_h;  // 16 for 63 input dims
  to_2d.init(cfg.transformer.model_dim, c2 * h2, 1, 1, 0, rng);
  ups.resize(2);
  ups[0].init(c2, 4 * c1, 3, 1, 1, rng);
  ups[1].init(c1, 4 * c0, 3, 1, 1, rng);
  conv_out.init(c0, 1, 3, 1, 1, rng);
}

Tensor Generator::forward(const Tensor& motion, const Tensor* music) const {
  const std::size_t t_len = motion.dim(0);
  Tensor tokens = motion_path.forward(motion);
  if (arch.use_music_pathway) {
    if (music == nullptr || !music->defined())
      throw ValidationError("generator: music input required (music pathway enabled)");
    if (music->dim(0) != t_len)
      throw ValidationError("generator: music length " + std::to_string(music->dim(0)) +
                            " != motion length " + std::to_string(t_len));
    Tensor music_tokens = music_path.forward(*music);
    std::size_t d = arch.transformer.model_dim;
    std::size_t tt = tokens.dim(0);
    Tensor m_emb = narrow(modality_embedding, 0, 0, 1);
    Tensor s_emb = narrow(modality_embedding, 0, 1, 1);
    Tensor tagged_motion = add_rowvec(tokens, reshape(m_emb, {d}));
    Tensor tagged_music = add_rowvec(music_tokens, reshape(s_emb, {d}));
    Tensor fused = cross_transformer.forward(concat({tagged_motion, tagged_music}, 0));
    tokens = narrow(fused, 0, 0, tt);  // motion half of the joint stream
  }
  // 1D -> 2D and upsampling back to [T, 63].
  auto [c0, c1, c2] = plan_channels(arch);
  Tensor seq = to_2d.forward(transpose2d(tokens));
  std::size_t h2 = motion_path.reduced_h;
  Tensor img = reshape(seq, {c2, h2, seq.dim(1)});
  img = pixel_shuffle2d(ups[0].forward(img), 2);
  img = pixel_shuffle2d(ups[1].forward(img), 2);
  Tensor out = conv_out.forward(img);  // [1, 4*h2, T]
  Tensor cropped = narrow(reshape(out, {out.dim(1), out.dim(2)}), 0, 0, arch.motion_dim);
  return transpose2d(cropped);
}

void Generator::collect(const std::string& prefix, std::vector<Param>& out) const {
  motion_path.collect(prefix + ".motion_path", out);
  if (arch.use_music_pathway) {
    music_path.collect(prefix + ".music_path", out);
    cross_transformer.collect(prefix + ".cross_transformer", out);
    out.push_back({prefix + ".modality_embedding", modality_embedding});
  }
  to_2d.collect(prefix + ".to_2d", out);
  for (std::size_t i = 0; i < ups.size(); ++i)
    ups[i].collect(prefix + ".up" + std::to_string(i), out);
  conv_out.collect(prefix + ".conv_out", out);
}

// ---- discriminator ---------------------------------------------------------------

void Discriminator::init(const ArchConfig& cfg, Rng& rng) {
  auto [c0, c1, c2] = plan_channels(cfg);
  (void)c2;
  downs.resize(2);
  downs[0].init(1, c0 * 2, 5, 2, 2, rng);
  downs[1].init(c0 * 2, c1 * 2, 5, 2, 2, rng);
  conv_out.init(c1 * 2, 1, 3, 1, 1, rng);
}

Tensor Discriminator::forward(const Tensor& motion) const {
  if (motion.ndim() != 2)
    throw ValidationError("discriminator: expected [T, F] input, got " +
                          shape_str(motion.shape()));
  if (motion.dim(0) < 16)
    throw ValidationError("discriminator: sequence length must be >= 16");
  Tensor img = reshape(transpose2d(motion), {1, motion.dim(1), motion.dim(0)});
  Tensor h = img;
  for (const auto& down : downs) h = down.forward(h);
  Tensor logits = conv_out.forward(h);
  return sigmoid(reshape(logits, {logits.dim(1), logits.dim(2)}));
}

void Discriminator::collect(const std::string& prefix, std::vector<Param>& out) const {
  for (std::size_t i = 0; i < downs.size(); ++i)
    downs[i].collect(prefix + ".down" + std::to_string(i), out);
  conv_out.collect(prefix + ".conv_out", out);
}

// ---- transfer model ---------------------------------------------------------------

TransferModel TransferModel::build(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TransferModel m;
  m.arch = cfg;
  Rng rng(seed);
  m.g_xy.init(cfg, rng);
  m.g_yx.init(cfg, rng);
  m.d_x.init(cfg, rng);
  m.d_y.init(cfg, rng);
  m.d2_x.init(cfg, rng);
  m.d2_y.init(cfg, rng);
  return m;
}

std::vector<Param> TransferModel::generator_params() const {
  std::vector<Param> out;
  g_xy.collect("g_xy", out);
  g_yx.collect("g_yx", out);
  return out;
}

std::vector<Param> TransferModel::discriminator_params() const {
  std::vector<Param> out;
  d_x.collect("d_x", out);
  d_y.collect("d_y", out);
  d2_x.collect("d2_x", out);
  d2_y.collect("d2_y", out);
  return out;
}

std::vector<Param> TransferModel::parameters() const {
  auto out = generator_params();
  auto d = discriminator_params();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::size_t TransferModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.size();
  return n;
}

Tensor motion_to_tensor(const MotionSequence& m) {
  return tensor({m.n_frames, kMotionDim}, m.data);
}

Tensor audio_to_tensor(const AudioSequence& a) {
  return tensor({a.n_frames, kAudioDim}, a.data);
}

MotionSequence tensor_to_motion(const Tensor& t, double fps, std::string style) {
  if (t.ndim() != 2 || t.dim(1) != kMotionDim)
    throw ValidationError("tensor_to_motion: expected [T, 63], got " +
                          shape_str(t.shape()));
  MotionSequence m;
  m.fps = fps;
  m.n_frames = t.dim(0);
  m.data = t.data();
  m.style = std::move(style);
  return m;
}

MotionSequence TransferModel::transfer(const MotionSequence& motion,
                                       const AudioSequence* music, bool x_to_y) const {
  NoGradGuard no_grad;
  MotionSequence padded = motion;
  AudioSequence padded_music;
  if (motion.n_frames < 16)
    throw ValidationError("transfer: clip must have at least 16 frames");
  std::size_t orig = motion.n_frames;
  padded = pad_to_multiple(motion, 4);
  Tensor in = motion_to_tensor(padded);
  Tensor music_t;
  const Tensor* music_ptr = nullptr;
  if (arch.use_music_pathway) {
    if (music == nullptr)
      throw ValidationError("transfer: model requires paired music input");
    if (music->n_frames != motion.n_frames)
      throw ValidationError("transfer: music/motion length mismatch");
    padded_music = pad_to_multiple(*music, 4);
    music_t = audio_to_tensor(padded_music);
    music_ptr = &music_t;
  }
  const Generator& g = x_to_y ? g_xy : g_yx;
  Tensor out = g.forward(in, music_ptr);
  MotionSequence result = tensor_to_motion(out, motion.fps);
  result.n_frames = orig;
  result.data.resize(orig * kMotionDim);
  return result;
}

// ---- ablations ------------------------------------------------------------------

std::vector<std::string> ablation_names() {
  return {"baseline", "transgan", "transgan_cl", "crosstransgan", "cycledance"};
}

AblationSpec build_ablation(const std::string& name, ArchConfig base) {
  AblationSpec spec;
  spec.name = name;
  spec.arch = base;
  if (name == "baseline") {
    spec.arch.use_motion_transformer = false;
    spec.arch.use_music_pathway = false;
    spec.curriculum = false;
  } else if (name == "transgan") {
    spec.arch.use_motion_transformer = true;
    spec.arch.use_music_pathway = false;
    spec.curriculum = false;
  } else if (name == "transgan_cl") {
    spec.arch.use_motion_transformer = true;
    spec.arch.use_music_pathway = false;
    spec.curriculum = true;
  } else if (name == "crosstransgan") {
    spec.arch.use_motion_transformer = true;
    spec.arch.use_music_pathway = true;
    spec.curriculum = false;
  } else if (name == "cycledance") {
    spec.arch.use_motion_transformer = true;
    spec.arch.use_music_pathway = true;
    spec.curriculum = true;
  } else {
    throw ValidationError("unknown ablation '" + name +
                          "' (expected baseline|transgan|transgan_cl|crosstransgan|"
                          "cycledance)");
  }
  spec.arch.validate();
  return spec;
}

}  // namespace cycledance
