#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cycledance/features.hpp"
#include "cycledance/rng.hpp"
#include "cycledance/tensor.hpp"

namespace cycledance {

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t model_dim = 64;
  std::size_t ff_dim = 128;
};

struct ArchConfig {
  std::size_t base_channels = 32;
  std::size_t n_down_blocks = 2;
  std::size_t n_res_blocks = 3;
  TransformerConfig transformer;
  bool use_motion_transformer = true;
  bool use_music_pathway = true;
  std::size_t motion_dim = kMotionDim;
  std::size_t music_dim = kAudioDim;

  void validate() const;
  std::string canonical_string() const;
};

/// Named leaf parameter handle. Tensors share storage with the layers.
struct Param {
  std::string name;
  Tensor value;
};

namespace nn {

struct LayerNorm {
  Tensor gain, bias;
  void init(std::size_t dim);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

/// Per-position channel normalization for conv maps: [C, ...] flattened to
/// positions x channels, layer-normalized over channels (the single norm
/// primitive standing in for the backbone's instance norm).
struct ChannelNorm {
  LayerNorm ln;
  void init(std::size_t channels);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Conv2dGlu {
  Tensor w, b;  // w: [2*Cout, Cin, K, K]
  ChannelNorm norm;
  std::size_t stride = 1, pad = 0;
  void init(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
            std::size_t pad, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Conv2dLayer {
  Tensor w, b;
  std::size_t stride = 1, pad = 0;
  void init(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
            std::size_t pad, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Conv1dGlu {
  Tensor w, b;  // w: [2*Cout, Cin, K]
  ChannelNorm norm;
  std::size_t stride = 1, pad = 0;
  void init(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
            std::size_t pad, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Conv1dLayer {
  Tensor w, b;
  std::size_t stride = 1, pad = 0;
  void init(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
            std::size_t pad, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Linear {
  Tensor w, b;  // w: [in, out]
  void init(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // x: [T, in]
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  std::size_t heads = 4;
  void init(std::size_t dim, std::size_t heads, Rng& rng);
  Tensor forward(const Tensor& x) const;  // [T, D] -> [T, D]
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

/// Post-LN encoder layer; the feed-forward uses a GLU activation.
struct TransformerLayer {
  MultiHeadAttention attn;
  Linear ff1, ff2;  // ff1: D -> 2*ff, ff2: ff -> D
  LayerNorm ln1, ln2;
  void init(const TransformerConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

/// Stacked encoder with a sinusoidal position embedding added to the input.
struct TransformerEncoder {
  std::vector<TransformerLayer> layers;
  bool add_position_embedding = true;
  void init(const TransformerConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& tokens) const;  // [T, D]
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

/// Sinusoidal position embedding as a constant [T, D] tensor.
Tensor position_embedding(std::size_t t_len, std::size_t dim);

}  // namespace nn

/// One modality encoder: 2-D downsampling with GLUs, 2D->1D reshape,
/// residual 1-D blocks, optional modality transformer.
struct PathwayEncoder {
  nn::Conv2dGlu conv_in;
  std::vector<nn::Conv2dGlu> downs;
  nn::Conv1dGlu to_1d;
  std::vector<nn::Conv1dGlu> res_blocks;
  nn::TransformerEncoder transformer;
  bool use_transformer = false;
  std::size_t feat_dim = 0;     // input feature width (63 or 35)
  std::size_t reduced_h = 0;    // feature axis extent after downsampling

  void init(std::size_t feat_dim, const ArchConfig& cfg, bool use_transformer, Rng& rng);
  /// x: [T, feat_dim] -> tokens [T/4, model_dim].
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct Generator {
  PathwayEncoder motion_path;
  PathwayEncoder music_path;  // present iff use_music_pathway
  nn::TransformerEncoder cross_transformer;
  Tensor modality_embedding;  // [2, model_dim]
  nn::Conv1dLayer to_2d;
  std::vector<nn::Conv2dGlu> ups;
  nn::Conv2dLayer conv_out;
  ArchConfig arch;

  void init(const ArchConfig& cfg, Rng& rng);
  /// motion: [T, 63]; music: [T, 35] when the music pathway is enabled
  /// (ignored otherwise). T >= 16 and divisible by 4.
  Tensor forward(const Tensor& motion, const Tensor* music) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

/// PatchGAN: 2-D GLU downsampling stack, plain conv last, sigmoid outputs.
struct Discriminator {
  std::vector<nn::Conv2dGlu> downs;
  nn::Conv2dLayer conv_out;

  void init(const ArchConfig& cfg, Rng& rng);
  /// motion: [T, 63] -> patch grid [H', W'] with values in (0, 1).
  Tensor forward(const Tensor& motion) const;
  void collect(const std::string& prefix, std::vector<Param>& out) const;
};

struct TransferModel {
  ArchConfig arch;
  Generator g_xy, g_yx;
  Discriminator d_x, d_y, d2_x, d2_y;

  static TransferModel build(const ArchConfig& cfg, std::uint64_t seed);

  std::vector<Param> generator_params() const;
  std::vector<Param> discriminator_params() const;
  std::vector<Param> parameters() const;
  std::size_t parameter_count() const;

  /// Whole-sequence style transfer (no grad recording). Pads to a multiple
  /// of 4 internally and trims the output back.
  MotionSequence transfer(const MotionSequence& motion, const AudioSequence* music,
                          bool x_to_y) const;
};

Tensor motion_to_tensor(const MotionSequence& m);
Tensor audio_to_tensor(const AudioSequence& a);
MotionSequence tensor_to_motion(const Tensor& t, double fps = kMotionFps,
                                std::string style = "");

struct AblationSpec {
  std::string name;
  ArchConfig arch;
  bool curriculum = false;
};

/// The five configurations of the ablation study: baseline, transgan,
/// transgan_cl, crosstransgan, cycledance.
AblationSpec build_ablation(const std::string& name, ArchConfig base);

std::vector<std::string> ablation_names();

}  // namespace cycledance
