#include "sacnet/network.hpp"

#include <algorithm>
#include <sstream>

#include "sacnet/errors.hpp"

namespace sacnet {

// ---- Ablation -------------------------------------------------------------

std::string Ablation::name() const {
  std::vector<std::string> parts;
  if (drop_acm) parts.emplace_back("acm");
  if (drop_awp) parts.emplace_back("awp");
  if (drop_sgm) parts.emplace_back("sgm");
  if (drop_afsm) parts.emplace_back("afsm");
  if (parts.empty()) return "none";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += "+" + parts[i];
  return out;
}

Ablation Ablation::parse(const std::string& component) {
  Ablation a;
  std::stringstream ss(component);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (part == "acm") a.drop_acm = true;
    else if (part == "awp") a.drop_awp = true;
    else if (part == "sgm") a.drop_sgm = true;
    else if (part == "afsm") a.drop_afsm = true;
    else if (part == "none" || part.empty()) continue;
    else throw ParameterError("unknown ablation component '" + part + "' (acm|awp|sgm|afsm|none)");
  }
  return a;
}

// ---- config ---------------------------------------------------------------

void SACNetConfig::validate() const {
  if (input_size == 0 || input_size % 32 != 0) {
    throw ParameterError("input_size must be a positive multiple of 32, got " +
                         std::to_string(input_size));
  }
  if (window_small < 1 || window_small > window_large) {
    throw ParameterError("window sizes need 1 <= M <= N, got M=" + std::to_string(window_small) +
                         " N=" + std::to_string(window_large));
  }
  for (std::size_t c : channels)
    if (c == 0) throw ParameterError("channel counts must be positive");
  if (decoder_channels == 0) throw ParameterError("decoder_channels must be positive");
  if (cascade_depth < 1) throw ParameterError("cascade_depth must be >= 1");
  if (heads == 0) throw ParameterError("heads must be >= 1");
  for (std::size_t i = 1; i < 4; ++i) {
    if (channels[i] % heads != 0) {
      throw ParameterError("channel count " + std::to_string(channels[i]) +
                           " not divisible by heads " + std::to_string(heads));
    }
  }
}

KeyValues SACNetConfig::to_key_values() const {
  KeyValues kv;
  kv["input_size"] = std::to_string(input_size);
  kv["window_small"] = std::to_string(window_small);
  kv["window_large"] = std::to_string(window_large);
  kv["channels"] = std::to_string(channels[0]) + "," + std::to_string(channels[1]) + "," +
                   std::to_string(channels[2]) + "," + std::to_string(channels[3]);
  kv["decoder_channels"] = std::to_string(decoder_channels);
  kv["cascade_depth"] = std::to_string(cascade_depth);
  kv["heads"] = std::to_string(heads);
  kv["seed"] = std::to_string(seed);
  kv["ablation"] = ablation.name();
  return kv;
}

namespace {
std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParameterError("config key '" + key + "': expected an unsigned integer, got '" + value + "'");
  }
}
}  // namespace

SACNetConfig SACNetConfig::from_key_values(const KeyValues& kv, SACNetConfig base) {
  auto get = [&](const char* key, std::size_t& field) {
    if (auto it = kv.find(key); it != kv.end()) field = parse_size(key, it->second);
  };
  get("input_size", base.input_size);
  get("size", base.input_size);
  get("window_small", base.window_small);
  get("window_large", base.window_large);
  get("decoder_channels", base.decoder_channels);
  get("cascade_depth", base.cascade_depth);
  get("heads", base.heads);
  if (auto it = kv.find("seed"); it != kv.end()) base.seed = parse_size("seed", it->second);
  if (auto it = kv.find("channels"); it != kv.end()) {
    std::stringstream ss(it->second);
    std::string part;
    std::vector<std::size_t> values;
    while (std::getline(ss, part, ',')) values.push_back(parse_size("channels", part));
    if (values.size() != 4) throw ParameterError("config key 'channels': expected four values");
    std::copy(values.begin(), values.end(), base.channels.begin());
  }
  if (auto it = kv.find("ablation"); it != kv.end()) base.ablation = Ablation::parse(it->second);
  return base;
}

SACNetConfig SACNetConfig::from_key_values(const KeyValues& kv) {
  return from_key_values(kv, SACNetConfig{});
}

// ---- SACNet ---------------------------------------------------------------

namespace {
// Each parameter group draws from its own stream so that switching a
// component off leaves the initial values of every other group unchanged.
Initializer group_init(std::uint64_t seed, const std::string& group) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : group) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return Initializer(seed * 0x9E3779B97F4A7C15ULL ^ h);
}

Tensor checked_add(const Tensor& a, const Tensor& b, const std::string& where) {
  if (a.shape() != b.shape()) {
    throw DimensionError(where + ": cannot add " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  return add(a, b);
}
}  // namespace

SACNet::SACNet(SACNetConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.channels;
  const std::size_t cd = config_.decoder_channels;
  const std::uint64_t seed = config_.seed;
  const Ablation& ab = config_.ablation;

  auto make_encoder = [&](Encoder& enc, const std::string& name) {
    Initializer init = group_init(seed, name);
    std::size_t in = 3;
    for (std::size_t s = 0; s < 4; ++s) {
      const std::string tag = name + ".stage" + std::to_string(s + 1);
      enc.w[s] = params_.add(tag + ".w", init.conv_weight(ch[s], in, 3));
      enc.b[s] = params_.add(tag + ".b", zeros({ch[s]}));
      in = ch[s];
    }
  };
  make_encoder(enc_rgb_, "enc_rgb");
  make_encoder(enc_t_, "enc_t");

  if (!ab.drop_acm && !ab.drop_sgm) {
    Initializer init = group_init(seed, "sgm");
    sgm_ = make_semantic_guidance_params(params_, init, ch, config_.heads);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t level = i + 2;
    const std::string tag = "l" + std::to_string(level);
    if (!ab.drop_acm) {
      Initializer init = group_init(seed, "acm." + tag);
      acm_[i] = make_acm_params(params_, init, "acm." + tag, ch[level - 1], config_.heads);
    }
    Initializer init = group_init(seed, "afsm." + tag);
    if (!ab.drop_afsm) {
      afsm_[i] = make_afsm_params(params_, init, "afsm." + tag, ch[level - 1], cd,
                                  config_.cascade_depth);
    } else {
      plain_fuse_[i].w = params_.add("fuse." + tag + ".w", init.conv_weight(cd, 2 * ch[level - 1], 3));
      plain_fuse_[i].b = params_.add("fuse." + tag + ".b", zeros({cd}));
    }
  }
  {
    Initializer init = group_init(seed, "decoder");
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string tag = "decoder.l" + std::to_string(i + 2);
      decoder_[i].w = params_.add(tag + ".w", init.conv_weight(cd, cd, 3));
      decoder_[i].b = params_.add(tag + ".b", zeros({cd}));
    }
    proj_rgb1_.w = params_.add("head.proj_rgb1.w", init.conv_weight(cd, ch[0], 1));
    proj_rgb1_.b = params_.add("head.proj_rgb1.b", zeros({cd}));
    proj_t1_.w = params_.add("head.proj_t1.w", init.conv_weight(cd, ch[0], 1));
    proj_t1_.b = params_.add("head.proj_t1.b", zeros({cd}));
    head_mid_.w = params_.add("head.mid.w", init.conv_weight(cd, cd, 3));
    head_mid_.b = params_.add("head.mid.b", zeros({cd}));
    head_out_.w = params_.add("head.out.w", init.conv_weight(1, cd, 3, 1.0));
    head_out_.b = params_.add("head.out.b", zeros({1}));
  }
}

FeatureMapSet SACNet::encode_one(const Encoder& enc, const Tensor& image) const {
  FeatureMapSet out;
  Tensor x = image;
  for (std::size_t s = 0; s < 4; ++s) {
    x = silu(conv2d(x, enc.w[s], enc.b[s], s == 0 ? 4 : 2, 1));
    out.levels[s] = x;
  }
  return out;
}

std::pair<FeatureMapSet, FeatureMapSet> SACNet::encode(const Tensor& rgb,
                                                       const Tensor& thermal) const {
  const Shape expected{3, config_.input_size, config_.input_size};
  if (rgb.shape() != expected || thermal.shape() != expected) {
    throw DimensionError("encode: expected inputs " + shape_str(expected) + ", got rgb " +
                         shape_str(rgb.shape()) + " and thermal " + shape_str(thermal.shape()));
  }
  return {encode_one(enc_rgb_, rgb), encode_one(enc_t_, thermal)};
}

WindowPairGrid SACNet::grid_for_level(std::size_t level) const {
  if (level < 2 || level > 4) throw ParameterError("window grids exist for levels 2..4");
  const std::size_t side = config_.input_size >> (level + 1);
  if (config_.ablation.drop_awp) return build_window_grid(side, side, side, side);
  const std::size_t small = std::min(config_.window_small, side);
  const std::size_t large = std::min(config_.window_large, side);
  return build_window_grid(side, side, small, large);
}

ForwardTrace SACNet::forward_trace(const Tensor& rgb, const Tensor& thermal) const {
  ForwardTrace tr;
  std::tie(tr.rgb, tr.thermal) = encode(rgb, thermal);
  const Ablation& ab = config_.ablation;

  if (sgm_) tr.guidance = semantic_guidance(tr.rgb, tr.thermal, *sgm_);

  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t level = i + 2;
    const Tensor& f_rgb = tr.rgb.level(level);
    const Tensor& f_t = tr.thermal.level(level);
    if (ab.drop_acm) {
      tr.correlated_rgb[i] = f_rgb;
      tr.correlated_t[i] = f_t;
    } else {
      const Tensor& e_rgb = tr.guidance ? tr.guidance->rgb_enhanced[i] : f_rgb;
      const Tensor& e_t = tr.guidance ? tr.guidance->t_enhanced[i] : f_t;
      AcmOutput acm = acm_forward(f_rgb, f_t, e_rgb, e_t, grid_for_level(level), *acm_[i]);
      tr.correlated_rgb[i] = acm.rgb;
      tr.correlated_t[i] = acm.thermal;
    }
    if (afsm_[i]) {
      tr.fused[i] = afsm_forward(tr.correlated_t[i], tr.correlated_rgb[i], *afsm_[i]).fused;
    } else {
      tr.fused[i] = conv2d(concat({tr.correlated_t[i], tr.correlated_rgb[i]}, 0), plain_fuse_[i].w,
                           plain_fuse_[i].b, 1, 1);
    }
  }

  auto decode = [&](const Tensor& x, std::size_t i) {
    return silu(conv2d(upsample_bilinear(x, 2), decoder_[i].w, decoder_[i].b, 1, 1));
  };
  tr.decoded[2] = decode(tr.fused[2], 2);
  tr.decoded[1] = decode(checked_add(tr.fused[1], tr.decoded[2], "decoder level 3"), 1);
  tr.decoded[0] = decode(checked_add(tr.fused[0], tr.decoded[1], "decoder level 2"), 0);

  const Tensor low_rgb = conv2d(tr.rgb.level(1), proj_rgb1_.w, proj_rgb1_.b, 1, 0);
  const Tensor low_t = conv2d(tr.thermal.level(1), proj_t1_.w, proj_t1_.b, 1, 0);
  const Tensor merged =
      checked_add(checked_add(tr.decoded[0], low_rgb, "prediction head"), low_t, "prediction head");
  const Tensor mid = silu(conv2d(merged, head_mid_.w, head_mid_.b, 1, 1));
  tr.logits = conv2d(upsample_bilinear(mid, 4), head_out_.w, head_out_.b, 1, 1);
  tr.saliency = sigmoid(tr.logits);
  return tr;
}

Tensor SACNet::forward(const Tensor& rgb, const Tensor& thermal) const {
  return forward_trace(rgb, thermal).saliency;
}

void SACNet::save(const std::string& dir) const {
  save_checkpoint(dir, params_, config_.to_key_values());
}

SACNet SACNet::load(const std::string& dir) {
  Checkpoint ck = load_checkpoint(dir);
  SACNet net(SACNetConfig::from_key_values(ck.config));
  for (const auto& [name, t] : net.params().entries()) {
    if (!ck.tensors.count(name)) throw IoError("checkpoint " + dir + " lacks parameter " + name);
  }
  net.params_.copy_values_from(ck.tensors);
  return net;
}

}  // namespace sacnet
