#pragma once

#include <array>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mirnav/errors.hpp"

namespace mirnav::nav {

// Training/architecture variants. Each maps to one loss or wiring delta:
//   full        generative model, expert losses, auxiliary value loss
//   noval       full without the value loss (omega = 0)
//   nogen       next state predicted deterministically, no latent, no KL
//   vanillagen  latent from the goal posterior, KL against N(0, I)
//   froview     posterior sees the front view only
//   bc          direct policy cross-entropy, no generation
//   plain_rl    advantage actor-critic with entropy bonus, no expert terms
//   random      uniform random actions, nothing trained
enum class Variant { kFull, kNoVal, kNoGen, kVanillaGen, kFroView, kBc, kPlainRl, kRandom };

inline constexpr std::array<Variant, 8> kAllVariants{Variant::kFull,   Variant::kNoVal,   Variant::kNoGen,
                                                     Variant::kVanillaGen, Variant::kFroView, Variant::kBc,
                                                     Variant::kPlainRl, Variant::kRandom};

constexpr std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoVal: return "noval";
    case Variant::kNoGen: return "nogen";
    case Variant::kVanillaGen: return "vanillagen";
    case Variant::kFroView: return "froview";
    case Variant::kBc: return "bc";
    case Variant::kPlainRl: return "plain_rl";
    case Variant::kRandom: return "random";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

// Latent z and decoder present.
constexpr bool is_generative(Variant v) {
  return v == Variant::kFull || v == Variant::kNoVal || v == Variant::kVanillaGen || v == Variant::kFroView;
}
// Action-conditioned prior network present.
constexpr bool has_prior_net(Variant v) { return v == Variant::kFull || v == Variant::kNoVal || v == Variant::kFroView; }
// Deterministic context map from fused views to the policy's second input.
constexpr bool has_context_net(Variant v) { return v == Variant::kNoGen || v == Variant::kBc || v == Variant::kPlainRl; }
constexpr bool uses_expert(Variant v) { return v != Variant::kPlainRl && v != Variant::kRandom; }
constexpr bool uses_reconstruction(Variant v) { return is_generative(v) || v == Variant::kNoGen; }

enum class TargetMode { kView, kClass };
enum class ZSource { kPrior, kPosterior };

struct ModelConfig {
  Variant variant = Variant::kFull;
  TargetMode target_mode = TargetMode::kView;
  ZSource policy_z_source = ZSource::kPrior;
  int view_dim = 72;
  int classes = 6;
  int state_dim = 64;   // d_s
  int latent_dim = 32;  // d_z
  int hidden = 128;
  int value_hidden = 32;
  bool spectral_norm = true;
  bool e2_squared = false;
  double alpha = 1.0;
  double beta = 0.01;
  double gamma = 0.0001;
  double omega = 0.5;
  double entropy_coef = 0.01;  // plain_rl only

  // Loss weight on the value term after the variant override.
  double effective_omega() const { return variant == Variant::kNoVal ? 0.0 : omega; }
  int posterior_views() const { return variant == Variant::kFroView ? 1 : 4; }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", std::string(variant_name(c.variant))},
          {"target_mode", c.target_mode == TargetMode::kView ? "view" : "class"},
          {"policy_z_source", c.policy_z_source == ZSource::kPrior ? "prior" : "posterior"},
          {"view_dim", c.view_dim},
          {"classes", c.classes},
          {"state_dim", c.state_dim},
          {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"value_hidden", c.value_hidden},
          {"spectral_norm", c.spectral_norm},
          {"e2_squared", c.e2_squared},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"omega", c.omega},
          {"entropy_coef", c.entropy_coef}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("target_mode")) {
      auto m = j.at("target_mode").get<std::string>();
      if (m != "view" && m != "class") throw ConfigError("target_mode must be view or class");
      c.target_mode = m == "view" ? TargetMode::kView : TargetMode::kClass;
    }
    if (j.contains("policy_z_source")) {
      auto m = j.at("policy_z_source").get<std::string>();
      if (m != "prior" && m != "posterior") throw ConfigError("policy_z_source must be prior or posterior");
      c.policy_z_source = m == "prior" ? ZSource::kPrior : ZSource::kPosterior;
    }
    c.view_dim = j.value("view_dim", c.view_dim);
    c.classes = j.value("classes", c.classes);
    c.state_dim = j.value("state_dim", c.state_dim);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.value_hidden = j.value("value_hidden", c.value_hidden);
    c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
    c.e2_squared = j.value("e2_squared", c.e2_squared);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    c.omega = j.value("omega", c.omega);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  if (c.state_dim < 1 || c.latent_dim < 1 || c.hidden < 1 || c.value_hidden < 1 || c.view_dim < 1 || c.classes < 1)
    throw ConfigError("model dimensions must be positive");
  if (c.alpha < 0 || c.beta < 0 || c.gamma < 0 || c.omega < 0 || c.entropy_coef < 0)
    throw ConfigError("loss weights must be non-negative");
  return c;
}

}  // namespace mirnav::nav
