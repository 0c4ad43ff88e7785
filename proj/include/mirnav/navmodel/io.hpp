#pragma once

#include <memory>
#include <string>

#include "mirnav/navmodel/model.hpp"
#include "mirnav/nnet/checkpoint.hpp"

namespace mirnav::nav {

// A model description together with its parameter values.
struct LoadedModel {
  std::shared_ptr<const NavModel> model;
  std::shared_ptr<const nnet::ParamStore<double>> params;
  nlohmann::json meta;
};

inline void save_model(const std::string& path, const NavModel& model, const nnet::ParamStore<double>& params,
                       nlohmann::json meta = nlohmann::json::object(),
                       const nnet::RmspropState<double>* optimizer = nullptr) {
  nnet::Checkpoint<double> ck;
  ck.params = params;
  if (optimizer) ck.optimizer = *optimizer;
  meta["model"] = to_json(model.config());
  ck.meta = std::move(meta);
  nnet::save_checkpoint(ck, path);
}

inline LoadedModel load_model(const std::string& path) {
  auto ck = nnet::load_checkpoint<double>(path);
  if (!ck.meta.contains("model")) throw ConfigError("checkpoint " + path + " has no model description");
  LoadedModel out;
  auto model = std::make_shared<const NavModel>(model_config_from_json(ck.meta.at("model")));
  if (!ck.params.same_layout(model->layout<double>()))
    throw ConfigError("checkpoint " + path + " does not match its model description");
  out.model = std::move(model);
  out.params = std::make_shared<const nnet::ParamStore<double>>(std::move(ck.params));
  out.meta = std::move(ck.meta);
  return out;
}

}  // namespace mirnav::nav
