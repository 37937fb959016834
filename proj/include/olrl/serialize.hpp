// On-disk formats for the pipeline's artifacts: tracklet archives and
// experience logs as JSON Lines, learned-model snapshots as a single JSON
// document, and the CSV writers shared by the benchmark and the CLI.
//
// All writers emit doubles through a fixed shortest-round-trip formatter so
// repeated runs with the same configuration and seeds produce byte-identical
// files (wall-clock columns are the one documented exception).
#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "olrl/agent.hpp"
#include "olrl/core.hpp"
#include "olrl/models.hpp"
#include "olrl/objective.hpp"
#include "olrl/objstate.hpp"
#include "olrl/track.hpp"

namespace olrl {

using nlohmann::json;

// Shortest decimal string that parses back to exactly the same double.
// Used everywhere a double lands in a CSV or SVG so output is reproducible.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v || (std::isnan(back) && std::isnan(v))) break;
    }
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// Tracklet archives: one JSON object per line, one line per (tracklet,
// frame) entry, carrying the segment mask as per-row run-length spans.

inline json mask_to_json(const BitMask& m) {
    json runs = json::array();
    for (int y = 0; y < m.height(); ++y) {
        int x = 0;
        while (x < m.width()) {
            if (!m.test(x, y)) {
                ++x;
                continue;
            }
            int x0 = x;
            while (x < m.width() && m.test(x, y)) ++x;
            runs.push_back(json::array({y, x0, x - x0}));
        }
    }
    return json{{"h", m.height()}, {"w", m.width()}, {"runs", runs}};
}

inline BitMask mask_from_json(const json& j) {
    BitMask m(j.at("h").get<int>(), j.at("w").get<int>());
    for (const json& run : j.at("runs")) {
        int y = run.at(0).get<int>();
        int x0 = run.at(1).get<int>();
        int len = run.at(2).get<int>();
        for (int x = x0; x < x0 + len; ++x) m.set(x, y);
    }
    return m;
}

inline void write_tracklets_jsonl(const std::string& path,
                                  const std::vector<Tracklet>& tracklets) {
    std::ofstream out = open_output(path);
    for (const Tracklet& tr : tracklets) {
        for (const TrackletEntry& e : tr.entries) {
            json line{{"tracklet_id", tr.id}, {"t", e.t}, {"mask", mask_to_json(e.seg.mask)}};
            out << line.dump() << '\n';
        }
    }
    if (!out) throw IoError("failed while writing " + path);
}

// Reads an archive back into bare tracklets (id, per-frame masks). Segment
// statistics and shape descriptors are recomputed from the masks.
inline std::vector<Tracklet> read_tracklets_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<Tracklet> tracklets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        int id = j.at("tracklet_id").get<int>();
        if (id < 0) throw IoError(path + " line " + std::to_string(line_no) + ": bad id");
        if (size_t(id) >= tracklets.size()) tracklets.resize(size_t(id) + 1);
        Tracklet& tr = tracklets[size_t(id)];
        tr.id = id;
        SegmentMask seg = make_segment_mask(mask_from_json(j.at("mask")));
        ZernikeDescriptor zd = zernike_descriptor(seg);
        tr.append(j.at("t").get<int>(), std::move(seg), zd);
    }
    return tracklets;
}

// ---------------------------------------------------------------------------
// Experience logs: one JSON object per line keyed by (episode, t), carrying
// the transition and both endpoint states. State tensors are flattened
// row-major over ascending track id (x before y for the 2-vectors).

namespace detail {

inline json state_to_json(const ObjectState& s) {
    json pos = json::array(), vel = json::array(), acc = json::array();
    json present = json::array(), has_vel = json::array(), has_acc = json::array();
    for (int k = 0; k < s.n_tracks; ++k) {
        present.push_back(int(s.present[size_t(k)]));
        has_vel.push_back(int(s.has_vel[size_t(k)]));
        has_acc.push_back(int(s.has_acc[size_t(k)]));
        pos.push_back(s.pos[size_t(k)].x);
        pos.push_back(s.pos[size_t(k)].y);
        vel.push_back(s.vel[size_t(k)].x);
        vel.push_back(s.vel[size_t(k)].y);
        acc.push_back(s.acc[size_t(k)].x);
        acc.push_back(s.acc[size_t(k)].y);
    }
    json contact = json::array();
    for (char c : s.contact) contact.push_back(int(c));
    return json{{"t", s.t},         {"n_tracks", s.n_tracks}, {"present", present},
                {"has_vel", has_vel}, {"has_acc", has_acc},     {"pos", pos},
                {"vel", vel},         {"acc", acc},             {"contact", contact}};
}

}  // namespace detail

inline void write_experiences_jsonl(const std::string& path, const ExperienceSet& set) {
    std::ofstream out = open_output(path);
    for (const Experience& e : set.items) {
        json labels = json::array();
        for (const VelLabel& lb : e.vel_labels)
            labels.push_back(json{{"track", lb.track}, {"v", {lb.v_next.x, lb.v_next.y}}});
        json line{{"episode", e.episode},
                  {"t", e.t},
                  {"action", int(e.action)},
                  {"reward", e.reward},
                  {"return", e.ret},
                  {"vel_labels", labels},
                  {"state", detail::state_to_json(*e.state)},
                  {"next", detail::state_to_json(*e.next)}};
        out << line.dump() << '\n';
    }
    if (!out) throw IoError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Model snapshots: a single JSON document holding every learned model as a
// node list per decision tree plus the non-tree fallbacks.

inline json tree_to_json(const DecisionTree& t) {
    json nodes = json::array();
    for (const DecisionTree::Node& n : t.nodes()) {
        json jn{{"feature", n.feature},
                {"threshold", n.threshold},
                {"left", n.left},
                {"right", n.right}};
        if (n.is_leaf()) {
            if (t.is_classifier())
                jn["dist"] = n.dist;
            else
                jn["value"] = n.value;
        }
        nodes.push_back(jn);
    }
    return json{
        {"n_classes", t.n_classes()}, {"n_features", t.n_features()}, {"nodes", nodes}};
}

inline DecisionTree tree_from_json(const json& j) {
    std::vector<DecisionTree::Node> nodes;
    for (const json& jn : j.at("nodes")) {
        DecisionTree::Node n;
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        if (jn.contains("value")) n.value = jn.at("value").get<double>();
        if (jn.contains("dist")) n.dist = jn.at("dist").get<std::vector<double>>();
        nodes.push_back(std::move(n));
    }
    return DecisionTree::from_parts(std::move(nodes), j.at("n_classes").get<int>(),
                                    j.at("n_features").get<int>());
}

inline json dynamics_to_json(const DynamicsModel& dyn) {
    json models = json::array();
    for (int k = 0; k < dyn.n_tracks; ++k) {
        for (int d = 0; d < 2; ++d) {
            const TrackDimModel& m = dyn.at(k, d);
            json jm{{"track", k},
                    {"dim", d},
                    {"rows", m.rows},
                    {"val_tree", m.val_tree},
                    {"val_marginal", m.val_marginal},
                    {"marginal", m.marginal}};
            if (m.tree) jm["tree"] = tree_to_json(*m.tree);
            models.push_back(jm);
        }
    }
    return json{{"n_tracks", dyn.n_tracks}, {"grid", dyn.grid.values}, {"models", models}};
}

inline json presence_to_json(const PresenceAppearance& pa) {
    json tracks = json::array();
    for (int k = 0; k < pa.n_tracks; ++k) {
        const PresenceAppearance::TrackModel& m = pa.tracks[size_t(k)];
        json jm{{"track", k}, {"always_present", m.always_present}, {"appear", m.appear}};
        if (m.tree) jm["tree"] = tree_to_json(*m.tree);
        tracks.push_back(jm);
    }
    return json{{"n_tracks", pa.n_tracks},
                {"frame_h", pa.frame_h},
                {"frame_w", pa.frame_w},
                {"tracks", tracks}};
}

inline json pairwise_to_json(const PairwiseModel& model) {
    json pairs = json::array();
    for (int i = 0; i < model.n_tracks; ++i) {
        for (int j = i + 1; j < model.n_tracks; ++j) {
            const PairModel& m = model.at(i, j);
            json jm{{"i", i},           {"j", j},
                    {"fitted", m.fitted},  {"rows", m.rows},
                    {"mean", m.mean},      {"val_tree", m.val_tree},
                    {"val_mean", m.val_mean}};
            if (m.tree) jm["tree"] = tree_to_json(*m.tree);
            pairs.push_back(jm);
        }
    }
    return json{{"target", model.target == PairTarget::reward ? "reward" : "value"},
                {"n_tracks", model.n_tracks},
                {"no_contact_fallback", model.no_contact_fallback},
                {"pairs", pairs}};
}

inline json models_to_json(const AgentModels& models) {
    if (!models.trained) throw UsageError("cannot snapshot untrained models");
    return json{{"dynamics", dynamics_to_json(models.dyn)},
                {"presence", presence_to_json(models.pa)},
                {"reward", pairwise_to_json(models.reward)},
                {"value", pairwise_to_json(models.value)}};
}

inline void write_models_json(const std::string& path, const AgentModels& models) {
    std::ofstream out = open_output(path);
    out << models_to_json(models).dump(2) << '\n';
    if (!out) throw IoError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Merge-proposal trace CSV: one row per scored proposal.

inline void write_objective_trace_csv(const std::string& path,
                                      const std::vector<ProposalTrace>& trace) {
    std::ofstream out = open_output(path);
    out << "round,track_a,track_b,E_D,E_R,E_V,O_before,O_after,accepted\n";
    for (const ProposalTrace& tr : trace) {
        out << tr.round << ',' << tr.track_a << ',' << tr.track_b << ','
            << format_double(tr.candidate.e_d) << ',' << format_double(tr.candidate.e_r)
            << ',' << format_double(tr.candidate.e_v) << ',' << format_double(tr.before)
            << ',' << format_double(tr.after) << ',' << (tr.accepted ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Generic CSV reading with row-numbered errors (row 0 is the header).

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Reads a CSV of doubles under the given header. Any structural problem is
// an IoError naming the offending row; a missing/empty header is row 0.
inline CsvTable read_csv(const std::string& path,
                         const std::vector<std::string>& expect_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    auto fail = [&path](int row, const std::string& what) {
        throw IoError(path + ": parse error at row " + std::to_string(row) + ": " + what);
    };
    CsvTable table;
    std::string line;
    if (!std::getline(in, line) || line.empty()) fail(0, "missing header");
    table.header = split_csv_line(line);
    if (!expect_header.empty() && table.header != expect_header) fail(0, "unexpected header");
    int row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) fail(row_no, "empty row");
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != table.header.size())
            fail(row_no, "expected " + std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        std::vector<double> vals;
        vals.reserve(fields.size());
        for (const std::string& f : fields) {
            try {
                size_t used = 0;
                double v = std::stod(f, &used);
                if (used != f.size()) throw std::invalid_argument("trailing characters");
                vals.push_back(v);
            } catch (const std::exception&) {
                fail(row_no, "bad number '" + f + "'");
            }
        }
        table.rows.push_back(std::move(vals));
    }
    return table;
}

}  // namespace olrl
