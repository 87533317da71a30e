#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "elstm/data.h"
#include "elstm/model.h"
#include "elstm/training.h"

namespace elstm::config {

enum class Task { Toy, LM, POS, DP };
std::string_view to_string(Task task);
Task parse_task(std::string_view s);

// Plain `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

// Fully resolved run settings. Vocabulary sizes in `model` are filled in by
// load_task_data.
struct RunConfig {
  Task task = Task::Toy;
  models::ModelConfig model;
  training::TrainOptions train;
  std::string train_data;
  std::string eval_data;
  std::size_t toy_length = 10;
};

// Applies the preset's defaults, then the explicit keys. Every problem is
// collected and reported in one ValidationError before any work starts.
RunConfig resolve(const std::map<std::string, std::string>& values);

// Keys understood by resolve(), with a one-line description each.
const std::vector<std::pair<std::string, std::string>>& documented_keys();

struct TaskData {
  data::Vocabulary source;
  data::Vocabulary target;
  std::vector<models::Example> train;
  std::vector<models::Example> eval;
};

// Reads the corpus for the task (or generates the detect-A set), builds the
// vocabularies from the training split, and sets vocabulary sizes in
// cfg.model.
TaskData load_task_data(RunConfig& cfg);

// Encodes an evaluation file with existing vocabularies.
std::vector<models::Example> load_examples(Task task, const std::filesystem::path& path,
                                           const data::Vocabulary& source,
                                           const data::Vocabulary& target);

}  // namespace elstm::config
