#pragma once

#include <string>
#include <vector>

#include "paclab/calibration.hpp"
#include "paclab/dataset.hpp"
#include "paclab/router.hpp"

namespace paclab {

// Shortest exact decimal form; parsing it back yields the same double.
std::string format_double(double v);

// Single-model CSV: header id,y_hat,u[,y_true][,x0,x1,...]; ids are opaque
// strings without commas. Parse errors name the line and field.
Dataset read_dataset_csv(const std::string& path, LabelKind kind);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Multi-model JSONL: a header line {"sources":[{"name":...,"cost":...},...]},
// then one record per line {"id":...,"features":[...],"y_hat":[...],"u":[...]
// [,"y_true":...]}.
RoutingDataset read_multi_jsonl(const std::string& path, LabelKind kind);
void write_multi_jsonl(const std::string& path, const RoutingDataset& data);

// Cluster JSONL: one line per point, {"id":...,"clusters":[...]}; cluster
// order is first appearance in the file.
ClusterSet read_clusters_jsonl(const std::string& path, const Dataset& data);
void write_clusters_jsonl(const std::string& path, const Dataset& data,
                          const ClusterSet& clusters);

void write_labeled_csv(const std::string& path, const Dataset& data,
                       const LabeledOutput& output);

std::string trace_to_json(const CalibrationTrace& trace);
CalibrationTrace trace_from_json(const std::string& text);

void save_router(const std::string& path, const RouterState& state);
RouterState load_router(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace paclab
