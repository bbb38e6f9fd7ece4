#include "nntuck/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace nntuck {

namespace fs = std::filesystem;

const char* const kSvgGeneratorVersion = "nntuck-svg 1";

std::string_view data_format_name(DataFormat f) {
  switch (f) {
    case DataFormat::long_tsv: return "long-tsv";
    case DataFormat::layer_matrices: return "layer-matrices";
    case DataFormat::dense_json: return "dense-json";
  }
  return "unknown";
}

DataFormat data_format_from_name(std::string_view name) {
  if (name == "long-tsv") return DataFormat::long_tsv;
  if (name == "layer-matrices") return DataFormat::layer_matrices;
  if (name == "dense-json") return DataFormat::dense_json;
  throw std::invalid_argument("unknown data format: " + std::string(name));
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

std::string file_digest(const fs::path& path) { return fnv1a64_hex(read_text_file(path)); }

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void CssDataset::validate() const {
  if (tensor.n1() != tensor.n2())
    throw ParseError("dataset: tensor must be square over sender x receiver");
  if (static_cast<int>(node_labels.size()) != tensor.n1())
    throw ParseError("dataset: node label count does not match dims");
  if (static_cast<int>(layer_labels.size()) != tensor.n3())
    throw ParseError("dataset: layer label count does not match dims");
  auto unique_labels = [](const std::vector<std::string>& labels) {
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  };
  if (!unique_labels(node_labels)) throw ParseError("dataset: duplicate node label");
  if (!unique_labels(layer_labels)) throw ParseError("dataset: duplicate layer label");
  for (double v : tensor.values())
    if (v < 0.0 || v != std::floor(v))
      throw ParseError("dataset: weights must be nonnegative integers");
}

// ---------------------------------------------------------------------------
// long-tsv

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

long parse_weight(const std::string& field, int line_no) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line_no) +
                     ": weight must be an integer, got '" + field + "'");
  if (v < 0)
    throw ParseError("line " + std::to_string(line_no) + ": negative weight");
  return v;
}

std::unordered_map<std::string, int> label_index(const std::vector<std::string>& labels) {
  std::unordered_map<std::string, int> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    idx.emplace(labels[i], static_cast<int>(i));
  return idx;
}

CssDataset load_long_tsv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  CssDataset ds;
  std::vector<std::string> nodes, layers;
  bool header_seen = false;
  std::string line;
  int line_no = 0;

  std::unordered_map<std::string, int> node_idx, layer_idx;
  std::vector<int> first_line;  // per linear tensor index, for duplicate reports
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (line.rfind("# ", 0) == 0 || line == "#") {
      auto fields = split_tabs(line.substr(2));
      if (fields.empty()) continue;
      const std::string& key = fields[0];
      if (key == "nodes")
        nodes.assign(fields.begin() + 1, fields.end());
      else if (key == "layers")
        layers.assign(fields.begin() + 1, fields.end());
      else if (key == "directed") {
        if (fields.size() != 2 || (fields[1] != "true" && fields[1] != "false"))
          throw ParseError("line " + std::to_string(line_no) +
                           ": directed must be true or false");
        ds.directed = fields[1] == "true";
      } else if (key == "meta") {
        if (fields.size() != 3)
          throw ParseError("line " + std::to_string(line_no) +
                           ": meta rows are `# meta<TAB>key<TAB>value`");
        ds.metadata[fields[1]] = fields[2];
      }
      // other comment keys (e.g. the format tag) are informational
      continue;
    }

    if (!header_seen) {
      if (line != "perceiver\tsender\treceiver\tweight")
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header perceiver<TAB>sender<TAB>receiver"
                         "<TAB>weight");
      if (nodes.empty())
        throw ParseError("missing `# nodes` manifest line before the header");
      if (layers.empty()) layers = nodes;
      node_idx = label_index(nodes);
      layer_idx = label_index(layers);
      const std::size_t total =
          nodes.size() * nodes.size() * layers.size();
      values.assign(total, 0.0);
      first_line.assign(total, 0);
      header_seen = true;
      continue;
    }

    auto fields = split_tabs(line);
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
    const auto p = layer_idx.find(fields[0]);
    if (p == layer_idx.end())
      throw ParseError("line " + std::to_string(line_no) + ": unknown perceiver '" +
                       fields[0] + "'");
    const auto s = node_idx.find(fields[1]);
    if (s == node_idx.end())
      throw ParseError("line " + std::to_string(line_no) + ": unknown sender '" +
                       fields[1] + "'");
    const auto r = node_idx.find(fields[2]);
    if (r == node_idx.end())
      throw ParseError("line " + std::to_string(line_no) + ": unknown receiver '" +
                       fields[2] + "'");
    const long w = parse_weight(fields[3], line_no);

    const int n = static_cast<int>(nodes.size());
    const std::size_t idx = static_cast<std::size_t>(
        s->second + static_cast<long>(n) * (r->second + static_cast<long>(n) * p->second));
    if (first_line[idx] != 0)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate triple (" +
                       fields[0] + ", " + fields[1] + ", " + fields[2] +
                       "), first listed at line " + std::to_string(first_line[idx]));
    first_line[idx] = line_no;
    values[idx] = static_cast<double>(w);
  }

  if (!header_seen) throw ParseError("missing column header line");
  ds.tensor = Tensor3(static_cast<int>(nodes.size()), static_cast<int>(nodes.size()),
                      static_cast<int>(layers.size()), std::move(values));
  ds.node_labels = std::move(nodes);
  ds.layer_labels = std::move(layers);
  ds.validate();
  return ds;
}

std::string join_tabs(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += '\t';
    out += fields[i];
  }
  return out;
}

void save_long_tsv(const CssDataset& ds, const fs::path& path) {
  std::string out = "# css-long-tsv\tv1\n";
  out += "# nodes\t" + join_tabs(ds.node_labels) + "\n";
  if (ds.layer_labels != ds.node_labels)
    out += "# layers\t" + join_tabs(ds.layer_labels) + "\n";
  out += std::string("# directed\t") + (ds.directed ? "true" : "false") + "\n";
  for (const auto& [key, value] : ds.metadata)
    out += "# meta\t" + key + "\t" + value + "\n";
  out += "perceiver\tsender\treceiver\tweight\n";
  const Tensor3& t = ds.tensor;
  for (int k = 0; k < t.n3(); ++k)
    for (int i = 0; i < t.n1(); ++i)
      for (int j = 0; j < t.n2(); ++j) {
        const double v = t(i, j, k);
        if (v == 0.0) continue;
        out += ds.layer_labels[static_cast<std::size_t>(k)] + "\t" +
               ds.node_labels[static_cast<std::size_t>(i)] + "\t" +
               ds.node_labels[static_cast<std::size_t>(j)] + "\t" +
               std::to_string(static_cast<long>(v)) + "\n";
      }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// layer-matrices

void check_file_safe(const std::string& label) {
  if (label.empty()) throw ParseError("empty label cannot name a layer file");
  for (char ch : label)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
          ch == '.'))
      throw ParseError("layer label '" + label +
                       "' is not filesystem-safe for the layer-matrices format");
}

void save_layer_matrices(const CssDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest = {{"format", "css-layer-matrices"},
                             {"version", 1},
                             {"nodes", ds.node_labels},
                             {"layers", ds.layer_labels},
                             {"directed", ds.directed},
                             {"metadata", ds.metadata}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  const Tensor3& t = ds.tensor;
  for (int k = 0; k < t.n3(); ++k) {
    const std::string& label = ds.layer_labels[static_cast<std::size_t>(k)];
    check_file_safe(label);
    std::string csv;
    for (int i = 0; i < t.n1(); ++i) {
      for (int j = 0; j < t.n2(); ++j) {
        if (j) csv += ',';
        csv += std::to_string(static_cast<long>(t(i, j, k)));
      }
      csv += '\n';
    }
    write_text_file(dir / (label + ".csv"), csv);
  }
}

CssDataset load_layer_matrices(const fs::path& dir) {
  const nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  CssDataset ds;
  ds.node_labels = manifest.at("nodes").get<std::vector<std::string>>();
  ds.layer_labels = manifest.at("layers").get<std::vector<std::string>>();
  ds.directed = manifest.value("directed", true);
  if (manifest.contains("metadata"))
    ds.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();

  const int n = static_cast<int>(ds.node_labels.size());
  const int l = static_cast<int>(ds.layer_labels.size());
  ds.tensor = Tensor3(n, n, l);
  for (int k = 0; k < l; ++k) {
    const fs::path file = dir / (ds.layer_labels[static_cast<std::size_t>(k)] + ".csv");
    std::istringstream in(read_text_file(file));
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (row >= n)
        throw ParseError(file.string() + ": more rows than nodes");
      std::istringstream cells(line);
      std::string cell;
      int col = 0;
      while (std::getline(cells, cell, ',')) {
        if (col >= n) throw ParseError(file.string() + ": row " +
                                       std::to_string(row + 1) + " has too many columns");
        ds.tensor(row, col, k) = static_cast<double>(parse_weight(cell, row + 1));
        ++col;
      }
      if (col != n)
        throw ParseError(file.string() + ": row " + std::to_string(row + 1) +
                         " has " + std::to_string(col) + " columns, expected " +
                         std::to_string(n));
      ++row;
    }
    if (row != n)
      throw ParseError(file.string() + ": has " + std::to_string(row) +
                       " rows, expected " + std::to_string(n));
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// dense-json

void save_dense_json(const CssDataset& ds, const fs::path& path) {
  const nlohmann::json j = {{"format", "css-dense"},
                            {"version", 1},
                            {"nodes", ds.node_labels},
                            {"layers", ds.layer_labels},
                            {"directed", ds.directed},
                            {"metadata", ds.metadata},
                            {"tensor",
                             {{"dims", {ds.tensor.n1(), ds.tensor.n2(), ds.tensor.n3()}},
                              {"values", ds.tensor.values()}}}};
  write_text_file(path, j.dump(2) + "\n");
}

CssDataset load_dense_json(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  CssDataset ds;
  ds.node_labels = j.at("nodes").get<std::vector<std::string>>();
  ds.layer_labels = j.at("layers").get<std::vector<std::string>>();
  ds.directed = j.value("directed", true);
  if (j.contains("metadata"))
    ds.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  const auto& tj = j.at("tensor");
  const auto dims = tj.at("dims");
  std::vector<double> values = tj.at("values").get<std::vector<double>>();
  try {
    ds.tensor = Tensor3(dims.at(0).get<int>(), dims.at(1).get<int>(),
                        dims.at(2).get<int>(), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace

CssDataset load_dataset(const fs::path& path, DataFormat format) {
  switch (format) {
    case DataFormat::long_tsv: return load_long_tsv(path);
    case DataFormat::layer_matrices: return load_layer_matrices(path);
    case DataFormat::dense_json: return load_dense_json(path);
  }
  throw std::invalid_argument("load_dataset: bad format");
}

CssDataset load_dataset_auto(const fs::path& path) {
  if (fs::is_directory(path)) return load_layer_matrices(path);
  if (path.extension() == ".json") return load_dense_json(path);
  return load_long_tsv(path);
}

void save_dataset(const CssDataset& ds, const fs::path& path, DataFormat format) {
  ds.validate();
  switch (format) {
    case DataFormat::long_tsv: save_long_tsv(ds, path); return;
    case DataFormat::layer_matrices: save_layer_matrices(ds, path); return;
    case DataFormat::dense_json: save_dense_json(ds, path); return;
  }
  throw std::invalid_argument("save_dataset: bad format");
}

// ---------------------------------------------------------------------------
// reports

std::string matrix_to_csv(const Eigen::MatrixXd& m,
                          const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& col_labels) {
  std::string csv = "row";
  for (const auto& c : col_labels) csv += "," + c;
  csv += '\n';
  for (int i = 0; i < m.rows(); ++i) {
    csv += row_labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < m.cols(); ++j) csv += "," + format_double(m(i, j));
    csv += '\n';
  }
  return csv;
}

std::string edges_to_tsv(const Eigen::MatrixXi& adjacency,
                         const std::vector<std::string>& labels) {
  std::string out = "from\tto\n";
  for (int i = 0; i < adjacency.rows(); ++i)
    for (int j = 0; j < adjacency.cols(); ++j)
      if (adjacency(i, j))
        out += labels[static_cast<std::size_t>(i)] + "\t" +
               labels[static_cast<std::size_t>(j)] + "\n";
  return out;
}

std::string svg_heatmap(const Eigen::MatrixXd& m,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::string& title) {
  const int cell = 22;
  const int left = 90, top = 56;
  const long rows = m.rows(), cols = m.cols();
  const long width = left + cols * cell + 20;
  const long height = top + rows * cell + 20;
  const double maxv = std::max(m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0, 1e-300);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<!-- generator: " + std::string(kSvgGeneratorVersion) + " -->\n";
  svg += "<text x=\"8\" y=\"16\" font-size=\"13\" font-family=\"sans-serif\">" +
         title + "</text>\n";
  for (long j = 0; j < cols; ++j)
    svg += "<text x=\"" + std::to_string(left + j * cell + cell / 2) + "\" y=\"" +
           std::to_string(top - 6) +
           "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">" +
           col_labels[static_cast<std::size_t>(j)] + "</text>\n";
  for (long i = 0; i < rows; ++i)
    svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" +
           std::to_string(top + i * cell + cell / 2 + 4) +
           "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">" +
           row_labels[static_cast<std::size_t>(i)] + "</text>\n";
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      const double v = m(i, j);
      const int shade =
          245 - static_cast<int>(std::lround(215.0 * std::min(std::abs(v) / maxv, 1.0)));
      const std::string fill = v >= 0.0
                                   ? "rgb(" + std::to_string(shade) + "," +
                                         std::to_string(shade) + ",245)"
                                   : "rgb(245," + std::to_string(shade) + "," +
                                         std::to_string(shade) + ")";
      svg += "<rect x=\"" + std::to_string(left + j * cell) + "\" y=\"" +
             std::to_string(top + i * cell) + "\" width=\"" + std::to_string(cell) +
             "\" height=\"" + std::to_string(cell) + "\" fill=\"" + fill +
             "\" stroke=\"white\"><title>" + format_double(v) + "</title></rect>\n";
    }
  svg += "</svg>\n";
  return svg;
}

namespace {

std::vector<std::string> index_labels(const char* prefix, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

std::vector<std::string> save_report(const ReportBundle& bundle,
                                     const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text_file(out_dir / name, text);
    files.push_back(name);
  };

  if (bundle.fit) {
    const FitResult& fit = *bundle.fit;
    const FitConfig cfg = bundle.fit_config.value_or(FitConfig{});
    const NNTuckModel& m = fit.model;
    const auto nodes = bundle.node_labels.empty()
                           ? index_labels("n", m.num_nodes())
                           : bundle.node_labels;
    const auto lays = bundle.layer_labels.empty()
                          ? index_labels("l", m.num_layers())
                          : bundle.layer_labels;
    const auto kcols = index_labels("k", m.k());
    const auto ccols = index_labels("c", m.c());

    emit("model.json",
         model_to_json(m, cfg.spec, fit.seed_used, fit.final_kl).dump(2) + "\n");
    nlohmann::json summary = {{"config", fit_config_to_json(cfg)},
                              {"iterations", fit.iterations},
                              {"final_kl", fit.final_kl},
                              {"final_loglik", fit.final_loglik},
                              {"monotone", fit.monotone},
                              {"init_scale_used", fit.init_scale_used},
                              {"seed_used", fit.seed_used},
                              {"restart_seeds", fit.restart_seeds},
                              {"kl_trace", fit.kl_trace}};
    if (fit.averaging_zeroed_column) summary["averaging_zeroed_column"] = true;
    emit("fit_summary.json", summary.dump(2) + "\n");
    emit("factor_u.csv", matrix_to_csv(m.u, nodes, kcols));
    emit("factor_v.csv", matrix_to_csv(m.v, nodes, kcols));
    emit("factor_y.csv", matrix_to_csv(m.y, lays, ccols));
    for (int c = 0; c < m.core.n3(); ++c) {
      Eigen::MatrixXd slice(m.core.n1(), m.core.n2());
      for (int j = 0; j < m.core.n2(); ++j)
        for (int i = 0; i < m.core.n1(); ++i) slice(i, j) = m.core(i, j, c);
      emit("core_slice_" + std::to_string(c) + ".csv",
           matrix_to_csv(slice, kcols, kcols));
      emit("heatmap_core_" + std::to_string(c) + ".svg",
           svg_heatmap(slice, kcols, kcols, "core slice " + std::to_string(c)));
    }
    emit("heatmap_u.svg", svg_heatmap(m.u, nodes, kcols, "U (outgoing memberships)"));
    emit("heatmap_v.svg", svg_heatmap(m.v, nodes, kcols, "V (incoming memberships)"));
    emit("heatmap_y.svg", svg_heatmap(m.y, lays, ccols, "Y (layer memberships)"));
  }

  if (bundle.test) {
    const TestSpec spec = bundle.test_spec.value_or(TestSpec{});
    const FitConfig cfg = bundle.fit_config.value_or(FitConfig{});
    emit("test_result.json",
         test_result_to_json(*bundle.test, spec, cfg).dump(2) + "\n");
    std::string line = "H0: " + std::string(regime_name(spec.null_spec.regime)) +
                       " | H1: " + std::string(regime_name(spec.alt_spec.regime)) +
                       " | " + std::string(test_kind_name(spec.kind)) + " | " +
                       bundle.test->decision() + "\n";
    emit("decision.txt", line);
  }

  if (bundle.sweep) {
    emit("sweep.csv", sweep_to_csv(*bundle.sweep));
    emit("sweep.json", sweep_to_json(*bundle.sweep).dump(2) + "\n");
  }

  if (bundle.relative) {
    const RelativeSpace& rel = *bundle.relative;
    const int l = static_cast<int>(rel.y_star.rows());
    const auto lays =
        bundle.layer_labels.empty() ? index_labels("l", l) : bundle.layer_labels;
    std::vector<std::string> basis_cols;
    for (int idx : rel.basis_layers)
      basis_cols.push_back("rel_" + lays[static_cast<std::size_t>(idx)]);
    emit("y_star.csv", matrix_to_csv(rel.y_star, lays, basis_cols));
    for (int s = 0; s < rel.core_star.n3(); ++s) {
      Eigen::MatrixXd slice(rel.core_star.n1(), rel.core_star.n2());
      for (int j = 0; j < rel.core_star.n2(); ++j)
        for (int i = 0; i < rel.core_star.n1(); ++i) slice(i, j) = rel.core_star(i, j, s);
      emit("core_star_slice_" + std::to_string(s) + ".csv",
           matrix_to_csv(slice, index_labels("k", rel.core_star.n1()),
                         index_labels("k", rel.core_star.n2())));
    }
    emit("heatmap_y_star.svg",
         svg_heatmap(rel.y_star, lays, basis_cols, "Y* (relative cognitive space)"));
    nlohmann::json basis = {{"basis_layers", rel.basis_layers},
                            {"has_negative", rel.has_negative}};
    emit("basis.json", basis.dump(2) + "\n");
  }

  return files;
}

}  // namespace nntuck
