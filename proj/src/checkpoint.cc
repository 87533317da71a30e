#include "elstm/checkpoint.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "elstm/errors.h"

namespace elstm::checkpoint {

using nlohmann::json;

namespace {

json tensor_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(),
                                                                   t.values().end())}};
}

Tensor tensor_from(const json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  return Tensor::from_shape(shape, values);
}

json config_json(const config::RunConfig& r) {
  const auto& m = r.model;
  return json{
      {"task", config::to_string(r.task)},
      {"model", models::to_string(m.kind)},
      {"cell", cells::to_string(m.cell)},
      {"input_mode", cells::to_string(m.input_mode)},
      {"source_vocab", m.source_vocab},
      {"target_vocab", m.target_vocab},
      {"embedding_dim", m.embedding_dim},
      {"hidden_dim", m.hidden_dim},
      {"ts", m.scale_period},
      {"attention_dim", m.attention_dim},
      {"max_decode_length", m.max_decode_length},
      {"targets_per_step", m.targets_per_step},
      {"pad_id", m.pad_id},
      {"start_id", m.start_id},
      {"stop_id", m.stop_id},
      {"loss_w_f", m.loss_weights.forward},
      {"loss_w_b", m.loss_weights.backward},
      {"loss_w_comb", m.loss_weights.combined},
      {"combination", models::to_string(m.combination)},
      {"prediction_feedback", m.prediction_feedback},
      {"epochs", r.train.epochs},
      {"batch_size", r.train.batch_size},
      {"learning_rate", r.train.learning_rate},
      {"epsilon", r.train.epsilon},
      {"clip_norm", r.train.clip_norm},
      {"seed", r.train.seed},
      {"toy_length", r.toy_length},
      {"train_data", r.train_data},
      {"eval_data", r.eval_data},
  };
}

config::RunConfig config_from(const json& j) {
  config::RunConfig r;
  auto& m = r.model;
  r.task = config::parse_task(j.at("task").get<std::string>());
  m.kind = models::parse_model_kind(j.at("model").get<std::string>());
  m.cell = cells::parse_cell_kind(j.at("cell").get<std::string>());
  m.input_mode = cells::parse_input_mode(j.at("input_mode").get<std::string>());
  j.at("source_vocab").get_to(m.source_vocab);
  j.at("target_vocab").get_to(m.target_vocab);
  j.at("embedding_dim").get_to(m.embedding_dim);
  j.at("hidden_dim").get_to(m.hidden_dim);
  j.at("ts").get_to(m.scale_period);
  j.at("attention_dim").get_to(m.attention_dim);
  j.at("max_decode_length").get_to(m.max_decode_length);
  j.at("targets_per_step").get_to(m.targets_per_step);
  j.at("pad_id").get_to(m.pad_id);
  j.at("start_id").get_to(m.start_id);
  j.at("stop_id").get_to(m.stop_id);
  j.at("loss_w_f").get_to(m.loss_weights.forward);
  j.at("loss_w_b").get_to(m.loss_weights.backward);
  j.at("loss_w_comb").get_to(m.loss_weights.combined);
  m.combination = models::parse_combination_mode(j.at("combination").get<std::string>());
  j.at("prediction_feedback").get_to(m.prediction_feedback);
  j.at("epochs").get_to(r.train.epochs);
  j.at("batch_size").get_to(r.train.batch_size);
  j.at("learning_rate").get_to(r.train.learning_rate);
  j.at("epsilon").get_to(r.train.epsilon);
  j.at("clip_norm").get_to(r.train.clip_norm);
  j.at("seed").get_to(r.train.seed);
  j.at("toy_length").get_to(r.toy_length);
  j.at("train_data").get_to(r.train_data);
  j.at("eval_data").get_to(r.eval_data);
  return r;
}

}  // namespace

Checkpoint capture(const models::Model& model, const config::RunConfig& run,
                   const training::TrainState& state, const data::Vocabulary& source,
                   const data::Vocabulary& target) {
  Checkpoint c;
  c.run = run;
  c.run.model = model.config();
  c.state = state;
  c.source_vocab = source.tokens();
  c.target_vocab = target.tokens();
  for (const auto& [name, e] : model.tape().entries()) {
    auto& dst = c.params.add(name, e.value);
    dst.accum = e.accum;
  }
  for (const auto& [name, value] : model.frozen()) {
    c.params.add(name, value);
    c.frozen.push_back(name);
  }
  return c;
}

models::Model restore_model(const Checkpoint& ckpt) {
  models::Model model(ckpt.run.model, ckpt.params);
  for (const auto& name : ckpt.frozen) model.freeze(name);
  return model;
}

std::string serialize(const Checkpoint& c) {
  json params = json::array();
  for (const auto& [name, e] : c.params.entries()) {
    json p = tensor_json(e.value);
    p["name"] = name;
    p["accum"] = std::vector<double>(e.accum.values().begin(), e.accum.values().end());
    params.push_back(std::move(p));
  }
  json root{
      {"format", "elstm-lab-checkpoint"},
      {"version", kFormatVersion},
      {"config", config_json(c.run)},
      {"step", c.state.step},
      {"epoch", c.state.epoch},
      {"vocab", {{"source", c.source_vocab}, {"target", c.target_vocab}}},
      {"frozen", c.frozen},
      {"params", std::move(params)},
  };
  return root.dump(1);
}

Checkpoint deserialize(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (root.at("format") != "elstm-lab-checkpoint") {
      throw ValidationError("not an elstm-lab checkpoint");
    }
    const int version = root.at("version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.run = config_from(root.at("config"));
    root.at("step").get_to(c.state.step);
    root.at("epoch").get_to(c.state.epoch);
    root.at("vocab").at("source").get_to(c.source_vocab);
    root.at("vocab").at("target").get_to(c.target_vocab);
    root.at("frozen").get_to(c.frozen);
    for (const auto& p : root.at("params")) {
      auto& e = c.params.add(p.at("name").get<std::string>(), tensor_from(p));
      auto accum = p.at("accum").get<std::vector<double>>();
      if (accum.size() != e.value.size()) {
        throw ValidationError("accumulator size mismatch for " + p.at("name").get<std::string>());
      }
      e.accum = Tensor::from_shape(e.value.shape(), accum);
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << serialize(ckpt) << '\n';
  if (!out) throw ValidationError("write failed for " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace elstm::checkpoint
