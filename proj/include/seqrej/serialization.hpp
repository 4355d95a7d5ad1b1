#pragma once
#include <string>

#include "seqrej/eval.hpp"
#include "seqrej/seqrejectron.hpp"

namespace seqrej {

// JSON object forms (nlohmann dumps); loaders throw ConfigError on malformed
// input. File variants read/write whole files; save_dataset writes JSONL with
// one trajectory per line and "actions" omitted for unlabeled entries.
std::string mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const std::string& text);

std::string policy_class_to_json(const PolicyClass& pc);
PolicyClass policy_class_from_json(const std::string& text);

std::string dataset_to_jsonl(const Dataset& data);
Dataset dataset_from_jsonl(const std::string& text);

std::string selective_policy_to_json(const SelectivePolicy& sel);
SelectivePolicy selective_policy_from_json(const std::string& text);

std::string validator_distribution_to_json(const ValidatorDistribution& dist);
std::string fit_report_to_json(const FitReport& report);
std::string metrics_report_to_json(const MetricsReport& report);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

} // namespace seqrej
