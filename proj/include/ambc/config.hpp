#pragma once

// Flat key=value configuration: one assignment per line, '#' starts a comment.
// Unknown keys, malformed lines, and out-of-range values raise ParseError
// naming the key and line.

#include <filesystem>
#include <string>
#include <vector>

#include "ambc/channel_sim.hpp"
#include "ambc/crld.hpp"
#include "ambc/dataset.hpp"
#include "ambc/train.hpp"

namespace ambc {

enum class SweepAxis { snr, pilots };
enum class Method { ls, mmse, crld };

const char* to_string(SweepAxis axis);
const char* to_string(Method method);
Method method_from_string(const std::string& name);

struct ExperimentPlan {
  SweepAxis axis = SweepAxis::snr;
  std::vector<double> values = {-10, -8, -6, -4, -2, 0, 2, 4, 6, 8, 10, 12};
  std::vector<Method> methods = {Method::ls, Method::mmse};
  Index trials = 10000;
  std::vector<Link> links = {Link::direct, Link::composite};
  std::string out = "nmse.csv";

  void validate() const;
  friend bool operator==(const ExperimentPlan&, const ExperimentPlan&) = default;
};

struct AppConfig {
  SystemConfig system;
  ExperimentPlan plan;
  TrainOptions train;
  CrldHyper hyper;
  Index train_examples = 50000;
  MixedSnr mixed;
  std::string checkpoint_dir = "checkpoints";
  Index threads = 1;

  friend bool operator==(const AppConfig&, const AppConfig&) = default;
};

AppConfig parse_config_text(const std::string& text);
AppConfig parse_config(const std::filesystem::path& path);
/// Every key with its effective value; parse_config_text(dump_config(c)) == c.
std::string dump_config(const AppConfig& config);
/// Key reference with defaults, for --help.
std::string config_help();

}  // namespace ambc
