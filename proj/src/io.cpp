#include "paclab/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "paclab/errors.hpp"

namespace paclab {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(const std::string& text, std::size_t line, const std::string& field) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ParseError("line " + std::to_string(line) + ": field '" + field +
                         "' is not a number: '" + text + "'");
    return v;
}

Label parse_label(const std::string& text, LabelKind kind, std::size_t line,
                  const std::string& field) {
    if (kind == LabelKind::discrete) return Label(text);
    return Label(parse_double(text, line, field));
}

// CSV cells are not quoted; separators inside ids or tokens cannot round-trip.
void check_csv_cell(const std::string& text, const char* what) {
    if (text.find_first_of(",\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " '" + text +
                              "' contains a CSV separator");
}

std::string label_text(const Label& label) {
    if (label.kind() == LabelKind::discrete) {
        check_csv_cell(label.token(), "label token");
        return label.token();
    }
    return format_double(label.value());
}

json label_json(const Label& label) {
    if (label.kind() == LabelKind::discrete) return json(label.token());
    return json(label.value());
}

Label label_from_json(const json& j, LabelKind kind, std::size_t line) {
    if (kind == LabelKind::discrete) {
        if (!j.is_string())
            throw ParseError("line " + std::to_string(line) + ": expected a string label");
        return Label(j.get<std::string>());
    }
    if (!j.is_number())
        throw ParseError("line " + std::to_string(line) + ": expected a numeric label");
    return Label(j.get<double>());
}

json parse_json_line(const std::string& line, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

Dataset read_dataset_csv(const std::string& path, LabelKind kind) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");

    const auto header = split_csv(line);
    int col_id = -1, col_yhat = -1, col_u = -1, col_truth = -1;
    std::vector<std::pair<std::size_t, int>> feature_cols;  // (feature idx, column)
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == "id") col_id = static_cast<int>(c);
        else if (name == "y_hat") col_yhat = static_cast<int>(c);
        else if (name == "u") col_u = static_cast<int>(c);
        else if (name == "y_true") col_truth = static_cast<int>(c);
        else if (name.size() > 1 && name[0] == 'x' &&
                 name.find_first_not_of("0123456789", 1) == std::string::npos)
            feature_cols.emplace_back(std::stoul(name.substr(1)), static_cast<int>(c));
        else
            throw ParseError("line 1: unknown column '" + name + "'");
    }
    if (col_id < 0 || col_yhat < 0 || col_u < 0)
        throw ParseError("line 1: header must contain id, y_hat and u");
    std::sort(feature_cols.begin(), feature_cols.end());
    for (std::size_t f = 0; f < feature_cols.size(); ++f)
        if (feature_cols[f].first != f)
            throw ParseError("line 1: feature columns must be x0, x1, ...");

    Dataset data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        DataPoint p;
        p.id = cells[col_id];
        if (p.id.empty())
            throw ParseError("line " + std::to_string(lineno) + ": field 'id' is empty");
        p.predicted = parse_label(cells[col_yhat], kind, lineno, "y_hat");
        p.uncertainty = parse_double(cells[col_u], lineno, "u");
        if (col_truth >= 0 && !cells[col_truth].empty())
            p.truth = parse_label(cells[col_truth], kind, lineno, "y_true");
        for (const auto& [f, c] : feature_cols)
            p.features.push_back(parse_double(cells[c], lineno, header[c]));
        data.points.push_back(std::move(p));
    }
    data.validate();
    return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out = open_out(path);
    const bool truths = std::any_of(data.points.begin(), data.points.end(),
                                    [](const DataPoint& p) { return p.truth.has_value(); });
    const std::size_t dim = data.points.empty() ? 0 : data.points.front().features.size();
    out << "id,y_hat,u";
    if (truths) out << ",y_true";
    for (std::size_t f = 0; f < dim; ++f) out << ",x" << f;
    out << "\n";
    for (const auto& p : data.points) {
        check_csv_cell(p.id, "id");
        out << p.id << ',' << label_text(p.predicted) << ','
            << format_double(p.uncertainty);
        if (truths) {
            out << ',';
            if (p.truth) out << label_text(*p.truth);
        }
        for (double x : p.features) out << ',' << format_double(x);
        out << "\n";
    }
}

RoutingDataset read_multi_jsonl(const std::string& path, LabelKind kind) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
    const json header = parse_json_line(line, 1);
    if (!header.contains("sources") || !header["sources"].is_array())
        throw ParseError("line 1: expected a sources header");

    RoutingDataset data;
    for (const auto& s : header["sources"]) {
        ModelSource src;
        src.name = s.at("name").get<std::string>();
        src.cost = s.value("cost", 0.0);
        data.sources.push_back(std::move(src));
    }
    const std::size_t k = data.sources.size();

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_json_line(line, lineno);
        MultiPrediction p;
        p.id = j.at("id").get<std::string>();
        if (j.contains("features"))
            p.features = j["features"].get<std::vector<double>>();
        const auto& yhat = j.at("y_hat");
        const auto& unc = j.at("u");
        if (!yhat.is_array() || !unc.is_array() || yhat.size() != k || unc.size() != k)
            throw ParseError("line " + std::to_string(lineno) +
                             ": y_hat and u must list one entry per source");
        for (std::size_t s = 0; s < k; ++s) {
            p.predicted.push_back(label_from_json(yhat[s], kind, lineno));
            p.uncertainty.push_back(unc[s].get<double>());
        }
        if (j.contains("y_true")) p.truth = label_from_json(j["y_true"], kind, lineno);
        data.points.push_back(std::move(p));
    }
    data.validate(/*require_truth=*/false);
    return data;
}

void write_multi_jsonl(const std::string& path, const RoutingDataset& data) {
    std::ofstream out = open_out(path);
    json header;
    header["sources"] = json::array();
    for (const auto& s : data.sources)
        header["sources"].push_back({{"name", s.name}, {"cost", s.cost}});
    out << header.dump() << "\n";
    for (const auto& p : data.points) {
        json j;
        j["id"] = p.id;
        if (!p.features.empty()) j["features"] = p.features;
        j["y_hat"] = json::array();
        j["u"] = json::array();
        for (std::size_t s = 0; s < p.predicted.size(); ++s) {
            j["y_hat"].push_back(label_json(p.predicted[s]));
            j["u"].push_back(p.uncertainty[s]);
        }
        if (p.truth) j["y_true"] = label_json(*p.truth);
        out << j.dump() << "\n";
    }
}

ClusterSet read_clusters_jsonl(const std::string& path, const Dataset& data) {
    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < data.size(); ++i) index_of.emplace(data.points[i].id, i);

    ClusterSet clusters;
    std::unordered_map<std::string, std::size_t> cluster_of;
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_json_line(line, lineno);
        const std::string id = j.at("id").get<std::string>();
        const auto it = index_of.find(id);
        if (it == index_of.end())
            throw ParseError("line " + std::to_string(lineno) + ": unknown id '" + id + "'");
        for (const auto& c : j.at("clusters")) {
            const std::string cid = c.get<std::string>();
            auto [cit, inserted] = cluster_of.emplace(cid, clusters.ids.size());
            if (inserted) {
                clusters.ids.push_back(cid);
                clusters.members.emplace_back();
            }
            clusters.members[cit->second].push_back(it->second);
        }
    }
    clusters.validate(data.size());
    return clusters;
}

void write_clusters_jsonl(const std::string& path, const Dataset& data,
                          const ClusterSet& clusters) {
    std::vector<std::vector<std::string>> per_point(data.size());
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t idx : clusters.members[c])
            per_point[idx].push_back(clusters.ids[c]);
    std::ofstream out = open_out(path);
    for (std::size_t i = 0; i < data.size(); ++i) {
        json j;
        j["id"] = data.points[i].id;
        j["clusters"] = per_point[i];
        out << j.dump() << "\n";
    }
}

void write_labeled_csv(const std::string& path, const Dataset& data,
                       const LabeledOutput& output) {
    std::ofstream out = open_out(path);
    out << "id,label,provenance\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        check_csv_cell(data.points[i].id, "id");
        out << data.points[i].id << ',' << label_text(output.labels[i]) << ','
            << (output.provenance[i] == Provenance::expert ? "expert" : "model")
            << "\n";
    }
}

std::string trace_to_json(const CalibrationTrace& trace) {
    json j;
    j["bins"] = trace.bins;
    j["tolerance"] = trace.tolerance;
    j["converged"] = trace.converged;
    j["updates"] = json::array();
    for (const auto& u : trace.updates)
        j["updates"].push_back(
            {{"cluster", u.cluster_id}, {"bin", u.bin}, {"delta", u.delta}});
    return j.dump(2);
}

CalibrationTrace trace_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad calibration trace: ") + e.what());
    }
    CalibrationTrace trace;
    trace.bins = j.at("bins").get<int>();
    trace.tolerance = j.at("tolerance").get<double>();
    trace.converged = j.at("converged").get<bool>();
    for (const auto& u : j.at("updates"))
        trace.updates.push_back({u.at("cluster").get<std::string>(),
                                 u.at("bin").get<int>(), u.at("delta").get<double>()});
    return trace;
}

void save_router(const std::string& path, const RouterState& state) {
    write_text_file(path, state.to_json());
}

RouterState load_router(const std::string& path) {
    return RouterState::from_json(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out = open_out(path);
    out << content;
    if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace paclab
