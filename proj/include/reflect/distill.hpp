#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflect/corpus.hpp"
#include "reflect/errors.hpp"
#include "reflect/model_client.hpp"
#include "reflect/reflection_record.hpp"

namespace reflect::distill {

// A pair the teacher failed to produce a usable reflection for.
struct Gap {
    std::string pair_id;
    std::string error;
};

struct FinetuneDataset {
    ReflectionKind kind = ReflectionKind::Simple;
    std::vector<ReflectionRecord> records;  // corpus order
    std::vector<Gap> gaps;

    corpus::SplitCounts counts() const;
    std::vector<ReflectionRecord> records_in(Split split) const;
};

struct GenerationOptions {
    client::GenerationConfig decoding = client::GenerationConfig::teacher();
    // Abort when gaps exceed this fraction of the corpus.
    double max_failure_fraction = 0.01;
    std::size_t workers = 4;
};

// Too many generation failures; carries the partial dataset so the caller can persist it.
class GenerationAborted : public Error {
  public:
    GenerationAborted(const std::string& what, FinetuneDataset partial)
        : Error(what), partial_(std::move(partial)) {}
    const FinetuneDataset& partial() const { return partial_; }

  private:
    FinetuneDataset partial_;
};

// Trims, strips one layer of surrounding quotes, and folds the text onto a single line.
std::string clean_reflection(std::string_view raw);

// One teacher call per pair, with a final sweep re-trying every gap once. Pairs without an
// assigned split are rejected with ValidationError.
FinetuneDataset generate_reflections(std::span<const corpus::QAPair> pairs, ReflectionKind kind,
                                     const client::ModelEndpoint& teacher, client::ModelClient& client,
                                     const GenerationOptions& options = {});

// JSONL text for one split: `{"text", "pair_id", "kind", "split"}` per line.
// Throws ExportError when the split has no records.
std::string finetune_jsonl(const FinetuneDataset& dataset, Split split);

// Writes `finetune_jsonl` to `path`; returns the line count. Throws ExportError on I/O failure.
std::size_t export_finetune_jsonl(const FinetuneDataset& dataset, Split split, const std::filesystem::path& path);

// `<kind>_<split>.jsonl`
std::string export_file_name(ReflectionKind kind, Split split);

struct Hyperparameters {
    double learning_rate = 0;
    int batch_size = 0;
    bool operator==(const Hyperparameters&) const = default;
};

struct TrainingManifest {
    std::string dataset_path;
    std::string model_name;
    int epochs = 4;
    bool early_stopping = true;
    std::string optimizer = "Adam";
    double weight_decay = 0.0;
    std::vector<double> learning_rate_grid{0.00005, 0.0005, 0.001};
    std::vector<int> batch_size_grid{8, 16, 32, 64};
    std::optional<Hyperparameters> chosen;
    client::GenerationConfig inference = client::GenerationConfig::student();
};

// Selected hyperparameters for the eight reference student models, e.g. "GPT-2 Small - Simple".
std::optional<Hyperparameters> reference_hyperparameters(std::string_view model_name);

// Unknown model names yield a manifest with the search grids only.
TrainingManifest build_training_manifest(const std::string& dataset_path, const std::string& model_name);

nlohmann::json to_json(const TrainingManifest& m);
nlohmann::json to_json(const FinetuneDataset& d);  // records plus gap report
FinetuneDataset finetune_dataset_from_json(const nlohmann::json& j);

}  // namespace reflect::distill
