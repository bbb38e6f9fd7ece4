#pragma once

// Dataset ingestion and serialization, report emission, and the small
// utilities (digests, float formatting, SVG heatmaps) the CLI builds on.
//
// Three interchangeable dataset formats, all UTF-8 with \n newlines and
// integer weights:
//
//   long-tsv        One file. Comment header lines `# key<TAB>value...`
//                   carry the manifest (`nodes`, optional `layers`,
//                   `directed`, repeated `meta` key/value rows), then the
//                   column header `perceiver\tsender\treceiver\tweight`,
//                   then one row per nonzero cell. Unlisted triples are 0.
//   layer-matrices  One directory: `manifest.json` plus one `<layer>.csv`
//                   adjacency matrix per layer, rows/cols in node order.
//   dense-json      One JSON document with labels, metadata and the tensor
//                   (dims + values in storage order).

#include "nntuck/analysis.hpp"
#include "nntuck/estimate.hpp"
#include "nntuck/model.hpp"
#include "nntuck/modelselect.hpp"
#include "nntuck/stats.hpp"
#include "nntuck/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nntuck {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DataFormat { long_tsv, layer_matrices, dense_json };

std::string_view data_format_name(DataFormat f);
DataFormat data_format_from_name(std::string_view name);

/// Multilayer network data with labels. For a perception survey the layers
/// are the perceivers themselves, so layer labels equal node labels.
struct CssDataset {
  Tensor3 tensor;  // N x N x L
  std::vector<std::string> node_labels;
  std::vector<std::string> layer_labels;
  std::map<std::string, std::string> metadata;
  bool directed = true;

  bool is_css() const {
    return tensor.n3() == tensor.n1() && layer_labels == node_labels;
  }
  void validate() const;
};

CssDataset load_dataset(const std::filesystem::path& path, DataFormat format);
/// Picks the format from the path: a directory is layer-matrices, `.json`
/// is dense-json, anything else long-tsv.
CssDataset load_dataset_auto(const std::filesystem::path& path);
void save_dataset(const CssDataset& ds, const std::filesystem::path& path,
                  DataFormat format);

/// Everything a run wants written. Optional parts are skipped; present parts
/// emit a fixed, documented file set (see save_report).
struct ReportBundle {
  std::vector<std::string> node_labels;
  std::vector<std::string> layer_labels;
  std::optional<FitResult> fit;
  std::optional<FitConfig> fit_config;
  std::optional<TestResult> test;
  std::optional<TestSpec> test_spec;
  std::optional<SweepResult> sweep;
  std::optional<RelativeSpace> relative;
};

/// Writes the bundle under out_dir and returns the emitted file names in
/// deterministic order:
///   fit:      model.json, fit_summary.json, factor_u.csv, factor_v.csv,
///             factor_y.csv, core_slice_<c>.csv, heatmap_u.svg,
///             heatmap_v.svg, heatmap_y.svg, heatmap_core_<c>.svg
///   test:     test_result.json, decision.txt
///   sweep:    sweep.csv, sweep.json
///   relative: y_star.csv, core_star_slice_<c>.csv, heatmap_y_star.svg,
///             basis.json
std::vector<std::string> save_report(const ReportBundle& bundle,
                                     const std::filesystem::path& out_dir);

/// Version string embedded in every generated SVG.
extern const char* const kSvgGeneratorVersion;

/// Static grayscale heatmap with row/column labels; one rect per entry.
std::string svg_heatmap(const Eigen::MatrixXd& m,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::string& title);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// FNV-1a 64-bit digest, as 16 hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string fnv1a64_hex(const std::string& bytes);
std::string file_digest(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Matrix as CSV with a label header row and one label column.
std::string matrix_to_csv(const Eigen::MatrixXd& m,
                          const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& col_labels);

/// Directed edge list: `from<TAB>to` per edge of a 0/1 matrix, with labels.
std::string edges_to_tsv(const Eigen::MatrixXi& adjacency,
                         const std::vector<std::string>& labels);

}  // namespace nntuck
