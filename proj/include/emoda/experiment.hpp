#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoda/dataset.hpp"
#include "emoda/model.hpp"
#include "emoda/train.hpp"

namespace emoda::experiment {

// Fraction of examples whose thresholded fake-news probability (>= 0.5 means
// fake) matches the veracity label.
double evaluate_accuracy(const model::Model<train::real>& m,
                         std::span<const data::LabeledExample> examples);

struct ResultRecord {
    std::string source;
    std::string target;
    std::string setting; // canonical display name, e.g. "DA MTL(P)"
    double accuracy = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;

    bool operator==(const ResultRecord&) const = default;
};

nlohmann::json record_to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);
std::vector<ResultRecord> read_results_file(const std::string& path); // missing file -> empty

struct CellOverride {
    // empty string matches any value
    std::string source, target, setting;
    std::optional<double> alpha, beta, lambda, lr;
    std::optional<int> max_epochs;
};

struct MatrixConfig {
    std::map<std::string, std::string> dataset_paths; // name -> jsonl path
    struct SyntheticPair {
        std::string source_name;
        std::string target_name;
        data::SyntheticSpec spec;
    };
    std::vector<SyntheticPair> synthetic_pairs;

    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<model::ModelVariant> settings; // canonical order enforced in reports

    train::TrainConfig base;
    std::vector<std::uint64_t> seeds; // default {base.seed}
    data::SplitFractions fractions;
    std::uint64_t split_seed = 0;

    std::string embeddings_path; // empty -> deterministic random table
    std::string lexicon_path;    // optional annotator for unlabeled examples
    std::vector<CellOverride> overrides;
    bool grid = false; // per-cell alpha/beta grid search

    void validate() const;
};

MatrixConfig load_matrix_config(const std::string& path);
MatrixConfig matrix_config_from_json(const nlohmann::json& j);
data::SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct CellFailure {
    std::string source, target, setting;
    std::uint64_t seed = 0;
    std::string error;
};

struct MatrixRunResult {
    std::vector<ResultRecord> records; // including previously completed cells
    int executed = 0;                  // cells actually run in this invocation
    std::vector<CellFailure> failures; // failed cells; not written to the
                                       // results file, so a re-run retries them
};

// Runs every (pair x setting x seed) cell, appending each record to
// results_path as it completes. Cells whose config hash already appears in
// the results file are skipped, so an interrupted matrix resumes where it
// stopped.
MatrixRunResult run_matrix(const MatrixConfig& config, const std::string& results_path);

// Table-shaped report: grouped by (source, target), rows in canonical
// setting order, accuracies to three decimals, best row(s) per group
// marked. Multi-seed cells report the median.
std::string render_report(std::span<const ResultRecord> records);
nlohmann::json report_json(std::span<const ResultRecord> records);

double median(std::vector<double> values);

} // namespace emoda::experiment
