#include "motkit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "motkit/formats.hpp"
#include "motkit/metrics.hpp"
#include "motkit/pipeline.hpp"
#include "motkit/simworld.hpp"
#include "motkit/supervision.hpp"
#include "motkit/tracker.hpp"

namespace motkit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad flags, bad config files and missing input paths; everything else that
// goes wrong while reading or combining data stays a DataError.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void diagnostic(std::ostream& err, const char* kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

// --- small file helpers ---

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed: " + path.string());
}

void require_safe_name(const std::string& name) {
    const bool ok = !name.empty() && name[0] != '.' &&
                    name.find_first_not_of(
                        "abcdefghijklmnopqrstuvwxyz"
                        "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                        "0123456789._-") == std::string::npos;
    if (!ok) throw DataError("sequence name unusable as a file name: '" + name + "'");
}

// --- parallel execution ---
// Worker threads pull indices from a shared counter; the first exception
// stops the distribution of new work and is rethrown after the join.

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::size_t>(count, jobs));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::exception_ptr first;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (!failed.load()) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!first) first = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

// --- config files ---
// One JSON object with optional "tracker", "detector", "supervision" and
// "metrics" sections; command-line flags override section values.

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw UsageError("config file " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file " + path + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "tracker" && key != "detector" && key != "supervision" && key != "metrics")
            throw UsageError("config file " + path + ": unknown section '" + key + "'");
    }
    return doc;
}

json config_section(const json& config, const char* name) {
    if (!config.contains(name)) return json::object();
    const json& section = config.at(name);
    if (!section.is_object())
        throw UsageError(std::string("config section '") + name + "' must be an object");
    return section;
}

void check_keys(const json& section, const char* where,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : section.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw UsageError(std::string(where) + " config: unknown key '" + key + "'");
    }
}

template <typename T>
void read_key(const json& section, const char* where, const char* key, T& value) {
    if (!section.contains(key)) return;
    try {
        value = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string(where) + " config: bad value for '" + key + "'");
    }
}

template <typename Fn>
auto usage_wrap(Fn&& fn) {
    try {
        return fn();
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

// --- flag groups shared between commands ---

struct JobsFlag {
    int jobs = 1;
    void add(CLI::App* cmd) {
        cmd->add_option("--jobs,-j", jobs, "sequences processed in parallel")
            ->envname("MOTKIT_JOBS")
            ->check(CLI::PositiveNumber);
    }
};

struct TrackerFlags {
    track::TrackerConfig values;
    std::string mode = "ConstV3D";
    std::string rule = "GeometricMean";
    bool interpolate = false;
    CLI::Option* o_score = nullptr;
    CLI::Option* o_vis = nullptr;
    CLI::Option* o_age = nullptr;
    CLI::Option* o_window = nullptr;
    CLI::Option* o_interp = nullptr;
    CLI::Option* o_mode = nullptr;
    CLI::Option* o_rule = nullptr;

    void add(CLI::App* cmd, bool with_mode) {
        o_score = cmd->add_option("--score-threshold", values.score_threshold,
                                  "minimum score to start a track");
        o_vis = cmd->add_option("--visibility-threshold", values.visibility_threshold,
                                "minimum visibility for a box to be published");
        o_age = cmd->add_option("--max-occlusion-age", values.max_occlusion_age,
                                "frames a track may coast unmatched");
        o_window = cmd->add_option("--rebirth-window", values.rebirth_window,
                                   "post-processing merge window, 0 disables");
        o_interp = cmd->add_flag("--rebirth-interpolate", interpolate,
                                 "fill merged gaps with interpolated boxes");
        if (with_mode)
            o_mode = cmd->add_option("--occlusion-mode", mode, "None, ConstV2D or ConstV3D")
                         ->check(CLI::IsMember({"None", "ConstV2D", "ConstV3D"}));
        o_rule = cmd->add_option("--radius-rule", rule, "GeometricMean or MaxSide")
                     ->check(CLI::IsMember({"GeometricMean", "MaxSide"}));
    }

    track::TrackerConfig resolve(const json& section) const {
        track::TrackerConfig cfg;
        check_keys(section, "tracker",
                   {"score_threshold", "visibility_threshold", "max_occlusion_age",
                    "rebirth_window", "rebirth_interpolate", "occlusion_mode",
                    "matching_radius_rule"});
        read_key(section, "tracker", "score_threshold", cfg.score_threshold);
        read_key(section, "tracker", "visibility_threshold", cfg.visibility_threshold);
        read_key(section, "tracker", "max_occlusion_age", cfg.max_occlusion_age);
        read_key(section, "tracker", "rebirth_window", cfg.rebirth_window);
        read_key(section, "tracker", "rebirth_interpolate", cfg.rebirth_interpolate);
        std::string mode_str = track::to_string(cfg.occlusion_mode);
        std::string rule_str = track::to_string(cfg.matching_radius_rule);
        read_key(section, "tracker", "occlusion_mode", mode_str);
        read_key(section, "tracker", "matching_radius_rule", rule_str);

        if (o_score->count()) cfg.score_threshold = values.score_threshold;
        if (o_vis->count()) cfg.visibility_threshold = values.visibility_threshold;
        if (o_age->count()) cfg.max_occlusion_age = values.max_occlusion_age;
        if (o_window->count()) cfg.rebirth_window = values.rebirth_window;
        if (o_interp->count()) cfg.rebirth_interpolate = interpolate;
        if (o_mode && o_mode->count()) mode_str = mode;
        if (o_rule->count()) rule_str = rule;
        cfg.occlusion_mode = usage_wrap([&] { return track::occlusion_mode_from_string(mode_str); });
        cfg.matching_radius_rule =
            usage_wrap([&] { return track::radius_rule_from_string(rule_str); });
        usage_wrap([&] { cfg.validate(); return 0; });
        return cfg;
    }
};

struct DetectorFlags {
    sim::DetectorNoiseConfig values;
    bool no_world_centers = false;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_sigma = nullptr;
    CLI::Option* o_eps = nullptr;
    CLI::Option* o_drop = nullptr;
    CLI::Option* o_floor = nullptr;
    CLI::Option* o_ceil = nullptr;
    CLI::Option* o_nowc = nullptr;

    void add(CLI::App* cmd) {
        o_seed = cmd->add_option("--det-seed", values.seed, "detector noise seed");
        o_sigma = cmd->add_option("--det-center-sigma", values.center_sigma,
                                  "center jitter, pixels");
        o_eps = cmd->add_option("--det-score-epsilon", values.score_epsilon,
                                "score noise mix-in")
                    ->check(CLI::Range(0.0, 1.0));
        o_drop = cmd->add_option("--det-drop-vis", values.drop_vis_threshold,
                                 "never detect below this visibility")
                     ->check(CLI::Range(0.0, 1.0));
        o_floor = cmd->add_option("--det-prob-floor", values.detect_prob_floor,
                                  "detection probability at visibility 0")
                      ->check(CLI::Range(0.0, 1.0));
        o_ceil = cmd->add_option("--det-prob-ceil", values.detect_prob_ceil,
                                 "detection probability at visibility 1")
                     ->check(CLI::Range(0.0, 1.0));
        o_nowc = cmd->add_flag("--no-world-centers", no_world_centers,
                               "strip 3D centers from detections");
    }

    sim::DetectorNoiseConfig resolve(const json& section) const {
        sim::DetectorNoiseConfig cfg;
        check_keys(section, "detector",
                   {"seed", "center_sigma", "score_epsilon", "drop_vis_threshold",
                    "detect_prob_floor", "detect_prob_ceil", "with_world_centers"});
        read_key(section, "detector", "seed", cfg.seed);
        read_key(section, "detector", "center_sigma", cfg.center_sigma);
        read_key(section, "detector", "score_epsilon", cfg.score_epsilon);
        read_key(section, "detector", "drop_vis_threshold", cfg.drop_vis_threshold);
        read_key(section, "detector", "detect_prob_floor", cfg.detect_prob_floor);
        read_key(section, "detector", "detect_prob_ceil", cfg.detect_prob_ceil);
        read_key(section, "detector", "with_world_centers", cfg.with_world_centers);
        if (o_seed->count()) cfg.seed = values.seed;
        if (o_sigma->count()) cfg.center_sigma = values.center_sigma;
        if (o_eps->count()) cfg.score_epsilon = values.score_epsilon;
        if (o_drop->count()) cfg.drop_vis_threshold = values.drop_vis_threshold;
        if (o_floor->count()) cfg.detect_prob_floor = values.detect_prob_floor;
        if (o_ceil->count()) cfg.detect_prob_ceil = values.detect_prob_ceil;
        if (o_nowc->count()) cfg.with_world_centers = !no_world_centers;
        return cfg;
    }
};

struct SupervisionFlags {
    supervision::SupervisionConfig values;
    std::string mode = "ConstV3D";
    CLI::Option* o_tvis = nullptr;
    CLI::Option* o_toccl = nullptr;
    CLI::Option* o_mode = nullptr;
    CLI::Option* o_weight = nullptr;
    CLI::Option* o_loff = nullptr;
    CLI::Option* o_ls = nullptr;
    CLI::Option* o_ld = nullptr;

    void add(CLI::App* cmd) {
        o_tvis = cmd->add_option("--t-vis", values.t_vis, "full-occlusion threshold");
        o_toccl = cmd->add_option("--t-occl", values.t_occl, "visibility threshold");
        o_mode = cmd->add_option("--mode", mode, "AllGT, FilteredGT, ConstV2D or ConstV3D")
                     ->check(CLI::IsMember({"AllGT", "FilteredGT", "ConstV2D", "ConstV3D"}));
        o_weight = cmd->add_option("--invisible-weight", values.invisible_loss_weight,
                                   "loss weight of occluded positives");
        o_loff = cmd->add_option("--lambda-off", values.lambda_off, "offset loss weight");
        o_ls = cmd->add_option("--lambda-s", values.lambda_s, "size loss weight");
        o_ld = cmd->add_option("--lambda-d", values.lambda_d, "displacement loss weight");
    }

    supervision::SupervisionConfig resolve(const json& section) const {
        supervision::SupervisionConfig cfg;
        check_keys(section, "supervision",
                   {"t_vis", "t_occl", "mode", "invisible_loss_weight", "lambda_off",
                    "lambda_s", "lambda_d"});
        read_key(section, "supervision", "t_vis", cfg.t_vis);
        read_key(section, "supervision", "t_occl", cfg.t_occl);
        read_key(section, "supervision", "invisible_loss_weight", cfg.invisible_loss_weight);
        read_key(section, "supervision", "lambda_off", cfg.lambda_off);
        read_key(section, "supervision", "lambda_s", cfg.lambda_s);
        read_key(section, "supervision", "lambda_d", cfg.lambda_d);
        std::string mode_str = supervision::to_string(cfg.mode);
        read_key(section, "supervision", "mode", mode_str);
        if (o_tvis->count()) cfg.t_vis = values.t_vis;
        if (o_toccl->count()) cfg.t_occl = values.t_occl;
        if (o_weight->count()) cfg.invisible_loss_weight = values.invisible_loss_weight;
        if (o_loff->count()) cfg.lambda_off = values.lambda_off;
        if (o_ls->count()) cfg.lambda_s = values.lambda_s;
        if (o_ld->count()) cfg.lambda_d = values.lambda_d;
        if (o_mode->count()) mode_str = mode;
        cfg.mode = usage_wrap([&] { return supervision::label_mode_from_string(mode_str); });
        usage_wrap([&] { cfg.validate(); return 0; });
        return cfg;
    }
};

struct MetricFlags {
    metrics::MetricConfig values;
    CLI::Option* o_tiou = nullptr;
    CLI::Option* o_biou = nullptr;
    CLI::Option* o_mt = nullptr;
    CLI::Option* o_ml = nullptr;

    void add(CLI::App* cmd) {
        o_tiou = cmd->add_option("--track-iou", values.track_iou_threshold,
                                 "track match threshold for AP");
        o_biou = cmd->add_option("--box-match-iou", values.box_match_iou,
                                 "per-frame box match threshold");
        o_mt = cmd->add_option("--mt-threshold", values.mt_threshold,
                               "mostly-tracked coverage bound");
        o_ml = cmd->add_option("--ml-threshold", values.ml_threshold,
                               "mostly-lost coverage bound");
    }

    metrics::MetricConfig resolve(const json& section) const {
        metrics::MetricConfig cfg;
        check_keys(section, "metrics",
                   {"track_iou_threshold", "box_match_iou", "mt_threshold", "ml_threshold"});
        read_key(section, "metrics", "track_iou_threshold", cfg.track_iou_threshold);
        read_key(section, "metrics", "box_match_iou", cfg.box_match_iou);
        read_key(section, "metrics", "mt_threshold", cfg.mt_threshold);
        read_key(section, "metrics", "ml_threshold", cfg.ml_threshold);
        if (o_tiou->count()) cfg.track_iou_threshold = values.track_iou_threshold;
        if (o_biou->count()) cfg.box_match_iou = values.box_match_iou;
        if (o_mt->count()) cfg.mt_threshold = values.mt_threshold;
        if (o_ml->count()) cfg.ml_threshold = values.ml_threshold;
        usage_wrap([&] { cfg.validate(); return 0; });
        return cfg;
    }
};

// --- dataset directories ---
// A dataset is a directory with manifest.json listing one document file per
// sequence; predictions use the same layout plus a format tag.

constexpr const char* kDatasetSchema = "motkit-dataset/1";
constexpr const char* kPredictionsSchema = "motkit-predictions/1";

struct ManifestEntry {
    std::string name;
    fs::path path;
};

json parse_manifest(const fs::path& dir, const char* expected_schema) {
    const fs::path file = dir / "manifest.json";
    if (!fs::exists(file)) throw DataError("missing manifest: " + file.string());
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw DataError(file.string() + ": " + e.what());
    }
    const std::string schema = doc.value("schema", "");
    if (schema != expected_schema) throw formats::SchemaVersionMismatch(schema);
    if (!doc.contains("sequences") || !doc.at("sequences").is_array())
        throw DataError(file.string() + ": missing 'sequences' array");
    return doc;
}

std::vector<ManifestEntry> manifest_entries(const fs::path& dir, const json& doc) {
    std::vector<ManifestEntry> entries;
    for (const json& item : doc.at("sequences")) {
        if (!item.is_object() || !item.contains("name") || !item.contains("file"))
            throw DataError("manifest entries need 'name' and 'file'");
        entries.push_back({item.at("name").get<std::string>(),
                           dir / item.at("file").get<std::string>()});
    }
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].name == entries[i - 1].name)
            throw DataError("duplicate sequence name in manifest: " + entries[i].name);
    return entries;
}

std::vector<formats::SequenceDocument> load_dataset(const fs::path& dir,
                                                    std::vector<ManifestEntry>& entries,
                                                    int jobs) {
    entries = manifest_entries(dir, parse_manifest(dir, kDatasetSchema));
    std::vector<formats::SequenceDocument> docs(entries.size());
    parallel_for(jobs, entries.size(), [&](std::size_t i) {
        docs[i] = formats::read_sequence(read_file(entries[i].path));
        if (docs[i].sequence.name != entries[i].name)
            throw DataError("sequence file " + entries[i].path.string() + " is named '" +
                            docs[i].sequence.name + "', manifest says '" + entries[i].name + "'");
    });
    return docs;
}

void write_dataset_manifest(const fs::path& dir, const std::vector<sim::Sequence>& sequences) {
    std::vector<const sim::Sequence*> sorted;
    for (const sim::Sequence& s : sequences) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](const sim::Sequence* a, const sim::Sequence* b) { return a->name < b->name; });
    json list = json::array();
    for (const sim::Sequence* s : sorted)
        list.push_back({{"name", s->name},
                        {"file", s->name + ".seq.jsonl"},
                        {"frames", static_cast<int>(s->frames.size())},
                        {"seed", s->seed}});
    const json manifest{{"schema", kDatasetSchema}, {"sequences", std::move(list)}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

// --- command implementations ---

int cmd_simulate(const std::string& scenarios_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, int jobs, std::ostream& out) {
    std::vector<sim::ScenarioConfig> configs =
        sim::expand_manifest(read_file(scenarios_path));
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (seed) configs[i].seed = *seed + i;
        require_safe_name(configs[i].name);
    }
    {
        std::vector<std::string> names;
        for (const auto& c : configs) names.push_back(c.name);
        std::sort(names.begin(), names.end());
        const auto dup = std::adjacent_find(names.begin(), names.end());
        if (dup != names.end()) throw DataError("duplicate scenario name: " + *dup);
    }
    fs::create_directories(out_dir);
    std::vector<sim::Sequence> sequences(configs.size());
    parallel_for(jobs, configs.size(), [&](std::size_t i) {
        sequences[i] = sim::simulate(configs[i]);
        write_file(fs::path(out_dir) / (sequences[i].name + ".seq.jsonl"),
                   formats::write_sequence({sequences[i], std::nullopt}));
    });
    write_dataset_manifest(out_dir, sequences);
    out << "wrote " << sequences.size() << " sequences to " << out_dir << "\n";
    return 0;
}

json stats_to_json(const sim::StatsReport& report) {
    auto category_json = [](const sim::CategoryStats& s) {
        return json{{"num_tracks", s.num_tracks},
                    {"avg_length", s.avg_length},
                    {"max_length", s.max_length},
                    {"frac_occluded_ge_10pct", s.frac_occluded_ge_10pct},
                    {"occlusion_histogram", s.occlusion_histogram}};
    };
    json per_category = json::object();
    for (const auto& [category, stats] : report.per_category)
        per_category[to_string(category)] = category_json(stats);
    return json{{"schema", "motkit-stats/1"},
                {"vis_threshold", report.occlusion_vis_threshold},
                {"per_category", std::move(per_category)},
                {"overall", category_json(report.overall)}};
}

std::string stats_table(const sim::StatsReport& report) {
    std::vector<std::array<std::string, 5>> rows;
    rows.push_back({"category", "tracks", "avg_len", "max_len", "occl>=10%"});
    auto add_row = [&](const std::string& name, const sim::CategoryStats& s) {
        char avg[32], frac[32];
        std::snprintf(avg, sizeof(avg), "%.2f", s.avg_length);
        std::snprintf(frac, sizeof(frac), "%.3f", s.frac_occluded_ge_10pct);
        rows.push_back({name, std::to_string(s.num_tracks), avg,
                        std::to_string(s.max_length), frac});
    };
    for (const auto& [category, stats] : report.per_category)
        add_row(to_string(category), stats);
    add_row("overall", report.overall);
    std::array<std::size_t, 5> width{};
    for (const auto& row : rows)
        for (int c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
    std::string text;
    for (const auto& row : rows) {
        for (int c = 0; c < 5; ++c) {
            if (c) text += "  ";
            const int pad = static_cast<int>(width[c] - row[c].size());
            if (c == 0) {
                text += row[c];
                text.append(pad, ' ');
            } else {
                text.append(pad, ' ');
                text += row[c];
            }
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        text += "\n";
    }
    return text;
}

std::string histogram_csv(const sim::StatsReport& report) {
    std::string csv = "category,bin_low,bin_high,count\n";
    auto add = [&](const std::string& name, const sim::CategoryStats& s) {
        const int bins = static_cast<int>(s.occlusion_histogram.size());
        for (int b = 0; b < bins; ++b) {
            csv += name + "," + formats::format_double(static_cast<double>(b) / bins) + "," +
                   formats::format_double(static_cast<double>(b + 1) / bins) + "," +
                   std::to_string(s.occlusion_histogram[b]) + "\n";
        }
    };
    for (const auto& [category, stats] : report.per_category) add(to_string(category), stats);
    add("overall", report.overall);
    return csv;
}

int cmd_stats(const std::string& dataset_dir, double vis_threshold, bool as_json,
              const std::string& out_dir, int jobs, std::ostream& out) {
    std::vector<ManifestEntry> entries;
    const auto docs = load_dataset(dataset_dir, entries, jobs);
    std::vector<sim::Sequence> sequences;
    sequences.reserve(docs.size());
    for (const auto& doc : docs) sequences.push_back(doc.sequence);
    const sim::StatsReport report = sim::dataset_stats(sequences, vis_threshold);
    if (as_json)
        out << stats_to_json(report).dump(2) << "\n";
    else
        out << stats_table(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "stats.json", stats_to_json(report).dump(2) + "\n");
        write_file(fs::path(out_dir) / "stats.txt", stats_table(report));
        write_file(fs::path(out_dir) / "occlusion_histogram.csv", histogram_csv(report));
    }
    return 0;
}

int cmd_label(const std::string& dataset_dir, const std::string& out_dir,
              const supervision::SupervisionConfig& config, int jobs, std::ostream& out) {
    std::vector<ManifestEntry> entries;
    auto docs = load_dataset(dataset_dir, entries, jobs);
    fs::create_directories(out_dir);
    parallel_for(jobs, docs.size(), [&](std::size_t i) {
        docs[i].labels = supervision::build_labels(docs[i].sequence, config);
        write_file(fs::path(out_dir) / (docs[i].sequence.name + ".seq.jsonl"),
                   formats::write_sequence(docs[i]));
    });
    std::vector<sim::Sequence> sequences;
    for (const auto& doc : docs) sequences.push_back(doc.sequence);
    write_dataset_manifest(out_dir, sequences);
    out << "labeled " << docs.size() << " sequences (" << supervision::to_string(config.mode)
        << ") to " << out_dir << "\n";
    return 0;
}

void write_predictions_manifest(const fs::path& dir, const std::string& format,
                                const std::vector<std::pair<std::string, std::string>>& files) {
    json list = json::array();
    for (const auto& [name, file] : files) list.push_back({{"name", name}, {"file", file}});
    const json manifest{
        {"schema", kPredictionsSchema}, {"format", format}, {"sequences", std::move(list)}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_track(const std::string& dataset_dir, const std::string& out_dir,
              const std::string& format, const sim::DetectorNoiseConfig& noise,
              const track::TrackerConfig& tracker_config, int jobs, std::ostream& out) {
    std::vector<ManifestEntry> entries;
    const auto docs = load_dataset(dataset_dir, entries, jobs);
    fs::create_directories(out_dir);
    std::vector<std::pair<std::string, std::string>> files(docs.size());
    parallel_for(jobs, docs.size(), [&](std::size_t i) {
        const sim::Sequence& seq = docs[i].sequence;
        const auto detections = sim::oracle_detector(seq, noise);
        const pipeline::TrackStream stream =
            pipeline::run_tracker(seq, detections, tracker_config);
        const std::string file = seq.name + "." + format + ".txt";
        const std::string text = format == "kitti"
                                     ? formats::write_kitti(pipeline::stream_to_kitti(stream))
                                     : formats::write_mot(pipeline::stream_to_mot(stream));
        write_file(fs::path(out_dir) / file, text);
        files[i] = {seq.name, file};
    });
    std::sort(files.begin(), files.end());
    write_predictions_manifest(out_dir, format, files);
    out << "tracked " << docs.size() << " sequences ("
        << track::to_string(tracker_config.occlusion_mode) << ") to " << out_dir << "\n";
    return 0;
}

std::vector<metrics::SequencePair> load_eval_pairs(const std::string& pred_dir,
                                                   const std::string& gt_dir, int jobs) {
    std::vector<ManifestEntry> gt_entries;
    const auto gt_docs = load_dataset(gt_dir, gt_entries, jobs);

    const json pred_manifest = parse_manifest(pred_dir, kPredictionsSchema);
    const std::string format = pred_manifest.value("format", "");
    if (format != "kitti" && format != "mot")
        throw DataError("predictions manifest has unknown format '" + format + "'");
    const auto pred_entries = manifest_entries(pred_dir, pred_manifest);

    std::vector<std::string> missing, extra;
    {
        std::vector<std::string> gt_names, pred_names;
        for (const auto& e : gt_entries) gt_names.push_back(e.name);
        for (const auto& e : pred_entries) pred_names.push_back(e.name);
        std::set_difference(gt_names.begin(), gt_names.end(), pred_names.begin(),
                            pred_names.end(), std::back_inserter(missing));
        std::set_difference(pred_names.begin(), pred_names.end(), gt_names.begin(),
                            gt_names.end(), std::back_inserter(extra));
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "predictions do not cover the dataset;";
        for (const auto& n : missing) msg += " missing " + n;
        for (const auto& n : extra) msg += " unexpected " + n;
        throw DataError(msg);
    }

    std::vector<metrics::SequencePair> pairs(gt_entries.size());
    parallel_for(jobs, gt_entries.size(), [&](std::size_t i) {
        pairs[i].name = gt_entries[i].name;
        pairs[i].gt = pipeline::annotation_tracks(gt_docs[i].sequence);
        const std::string text = read_file(pred_entries[i].path);
        pairs[i].pred = format == "kitti"
                            ? pipeline::kitti_to_tracks(formats::parse_kitti(text))
                            : pipeline::mot_to_tracks(formats::parse_mot(text));
    });
    return pairs;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const metrics::MetricConfig& config, bool as_json, const std::string& out_dir,
             int jobs, std::ostream& out) {
    const auto pairs = load_eval_pairs(pred_dir, gt_dir, jobs);
    const metrics::MetricsReport report = metrics::evaluate(pairs, config);
    if (as_json)
        out << metrics::report_to_json(report) << "\n";
    else
        out << metrics::report_table(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "report.json", metrics::report_to_json(report) + "\n");
        write_file(fs::path(out_dir) / "report.txt", metrics::report_table(report));
    }
    return 0;
}

struct AblationRow {
    track::OcclusionMode mode;
    bool rebirth = false;
    metrics::MetricsReport report;
};

json ablation_to_json(const std::vector<AblationRow>& rows, int rebirth_window) {
    json out{{"schema", "motkit-ablation/1"}, {"rebirth_window", rebirth_window}};
    json jrows = json::array();
    for (const AblationRow& row : rows) {
        json ap = json::object();
        for (int c = 0; c < kNumCategories; ++c)
            if (row.report.class_present[c])
                ap[to_string(static_cast<Category>(c))] =
                    row.report.per_class[c].track_ap;
        jrows.push_back({{"occlusion_mode", track::to_string(row.mode)},
                         {"rebirth", row.rebirth},
                         {"ap", std::move(ap)},
                         {"map", row.report.mean_ap}});
    }
    out["rows"] = std::move(jrows);
    return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"mode", "rebirth"};
    for (int c = 0; c < kNumCategories; ++c)
        header.push_back(std::string("AP[") + to_string(static_cast<Category>(c)) + "]");
    header.push_back("mAP");
    cells.push_back(header);
    for (const AblationRow& row : rows) {
        std::vector<std::string> line{track::to_string(row.mode), row.rebirth ? "on" : "off"};
        for (int c = 0; c < kNumCategories; ++c) {
            if (row.report.class_present[c]) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.4f", row.report.per_class[c].track_ap);
                line.push_back(buf);
            } else {
                line.push_back("-");
            }
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", row.report.mean_ap);
        line.push_back(buf);
        cells.push_back(line);
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string text;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) text += "  ";
            const int pad = static_cast<int>(width[c] - row[c].size());
            if (c <= 1) {
                text += row[c];
                text.append(pad, ' ');
            } else {
                text.append(pad, ' ');
                text += row[c];
            }
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        text += "\n";
    }
    return text;
}

int cmd_ablate(const std::string& dataset_dir, const sim::DetectorNoiseConfig& noise,
               const track::TrackerConfig& base, const metrics::MetricConfig& metric_config,
               bool as_json, const std::string& out_dir, int jobs, std::ostream& out) {
    std::vector<ManifestEntry> entries;
    const auto docs = load_dataset(dataset_dir, entries, jobs);
    const std::size_t n = docs.size();

    std::vector<std::vector<std::vector<sim::Detection>>> detections(n);
    std::vector<metrics::TrackSet> gt(n);
    parallel_for(jobs, n, [&](std::size_t i) {
        detections[i] = sim::oracle_detector(docs[i].sequence, noise);
        gt[i] = pipeline::annotation_tracks(docs[i].sequence);
    });

    const int on_window = base.rebirth_window > 0 ? base.rebirth_window : 8;
    std::vector<AblationRow> rows;
    for (const auto mode : {track::OcclusionMode::None, track::OcclusionMode::ConstV2D,
                            track::OcclusionMode::ConstV3D})
        for (const bool rebirth : {false, true}) rows.push_back({mode, rebirth, {}});

    std::vector<std::vector<metrics::TrackSet>> preds(rows.size(),
                                                      std::vector<metrics::TrackSet>(n));
    parallel_for(jobs, rows.size() * n, [&](std::size_t flat) {
        const std::size_t r = flat / n;
        const std::size_t i = flat % n;
        track::TrackerConfig cfg = base;
        cfg.occlusion_mode = rows[r].mode;
        cfg.rebirth_window = rows[r].rebirth ? on_window : 0;
        preds[r][i] = pipeline::stream_to_tracks(
            pipeline::run_tracker(docs[i].sequence, detections[i], cfg));
    });
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<metrics::SequencePair> pairs(n);
        for (std::size_t i = 0; i < n; ++i) {
            pairs[i].name = docs[i].sequence.name;
            pairs[i].pred = preds[r][i];
            pairs[i].gt = gt[i];
        }
        rows[r].report = metrics::evaluate(pairs, metric_config);
    }

    if (as_json)
        out << ablation_to_json(rows, on_window).dump(2) << "\n";
    else
        out << ablation_table(rows);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "ablation.json",
                   ablation_to_json(rows, on_window).dump(2) + "\n");
        write_file(fs::path(out_dir) / "ablation.txt", ablation_table(rows));
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"deterministic multi-object tracking sandbox: simulation, labeling,"
                 " tracking and evaluation"};
    app.name("motkit");
    app.require_subcommand(1);

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "expand a scenario manifest into a dataset");
    std::string sim_scenarios, sim_out;
    std::optional<std::uint64_t> sim_seed;
    JobsFlag sim_jobs;
    c_sim->add_option("--scenarios", sim_scenarios, "scenario manifest JSON")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim_out, "output dataset directory")->required();
    c_sim->add_option("--seed", sim_seed, "override scenario seeds (seed + index)");
    sim_jobs.add(c_sim);

    // stats
    auto* c_stats = app.add_subcommand("stats", "dataset statistics report");
    std::string stats_dataset, stats_out;
    double stats_threshold = 0.05;
    bool stats_json = false;
    JobsFlag stats_jobs;
    c_stats->add_option("--dataset", stats_dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_stats->add_option("--vis-threshold", stats_threshold,
                        "visibility below which a frame counts as fully occluded")
        ->check(CLI::Range(0.0, 1.0));
    c_stats->add_flag("--json", stats_json, "print JSON instead of the table");
    c_stats->add_option("--out", stats_out, "also write stats.json/stats.txt/histogram CSV here");
    stats_jobs.add(c_stats);

    // label
    auto* c_label = app.add_subcommand("label", "attach supervision labels to a dataset");
    std::string label_dataset, label_out, label_config;
    SupervisionFlags label_flags;
    JobsFlag label_jobs;
    c_label->add_option("--dataset", label_dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_label->add_option("--out", label_out, "output directory for labeled documents")
        ->required();
    c_label->add_option("--config", label_config, "JSON config file (supervision section)")
        ->check(CLI::ExistingFile);
    label_flags.add(c_label);
    label_jobs.add(c_label);

    // track
    auto* c_track = app.add_subcommand("track", "run the tracker, write prediction files");
    std::string track_dataset, track_out, track_config;
    std::string track_format = "kitti";
    TrackerFlags track_flags;
    DetectorFlags track_det;
    JobsFlag track_jobs;
    c_track->add_option("--dataset", track_dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_track->add_option("--out", track_out, "output directory for predictions")->required();
    c_track->add_option("--format", track_format, "prediction file format")
        ->check(CLI::IsMember({"kitti", "mot"}));
    c_track->add_option("--config", track_config, "JSON config file (tracker/detector sections)")
        ->check(CLI::ExistingFile);
    track_flags.add(c_track, true);
    track_det.add(c_track);
    track_jobs.add(c_track);

    // eval
    auto* c_eval = app.add_subcommand("eval", "score predictions against a dataset");
    std::string eval_pred, eval_gt, eval_out, eval_config;
    bool eval_json = false;
    MetricFlags eval_flags;
    JobsFlag eval_jobs;
    c_eval->add_option("--pred", eval_pred, "predictions directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_eval->add_option("--gt", eval_gt, "dataset directory with ground truth")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_eval->add_option("--config", eval_config, "JSON config file (metrics section)")
        ->check(CLI::ExistingFile);
    c_eval->add_flag("--json", eval_json, "print JSON instead of the table");
    c_eval->add_option("--out", eval_out, "also write report.json/report.txt here");
    eval_flags.add(c_eval);
    eval_jobs.add(c_eval);

    // ablate
    auto* c_abl = app.add_subcommand(
        "ablate", "compare occlusion modes x rebirth on one dataset");
    std::string abl_dataset, abl_out, abl_config;
    bool abl_json = false;
    TrackerFlags abl_flags;
    DetectorFlags abl_det;
    MetricFlags abl_metrics;
    JobsFlag abl_jobs;
    c_abl->add_option("--dataset", abl_dataset, "dataset directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_abl->add_option("--config", abl_config,
                      "JSON config file (tracker/detector/metrics sections)")
        ->check(CLI::ExistingFile);
    c_abl->add_flag("--json", abl_json, "print JSON instead of the table");
    c_abl->add_option("--out", abl_out, "also write ablation.json/ablation.txt here");
    abl_flags.add(c_abl, false);
    abl_det.add(c_abl);
    abl_metrics.add(c_abl);
    abl_jobs.add(c_abl);

    std::vector<const char*> argv;
    argv.push_back("motkit");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());

        if (c_sim->parsed())
            return cmd_simulate(sim_scenarios, sim_out, sim_seed, sim_jobs.jobs, out);
        if (c_stats->parsed())
            return cmd_stats(stats_dataset, stats_threshold, stats_json, stats_out,
                             stats_jobs.jobs, out);
        if (c_label->parsed()) {
            const json config = load_config_file(label_config);
            return cmd_label(label_dataset, label_out,
                             label_flags.resolve(config_section(config, "supervision")),
                             label_jobs.jobs, out);
        }
        if (c_track->parsed()) {
            const json config = load_config_file(track_config);
            return cmd_track(track_dataset, track_out, track_format,
                             track_det.resolve(config_section(config, "detector")),
                             track_flags.resolve(config_section(config, "tracker")),
                             track_jobs.jobs, out);
        }
        if (c_eval->parsed()) {
            const json config = load_config_file(eval_config);
            return cmd_eval(eval_pred, eval_gt,
                            eval_flags.resolve(config_section(config, "metrics")), eval_json,
                            eval_out, eval_jobs.jobs, out);
        }
        if (c_abl->parsed()) {
            const json config = load_config_file(abl_config);
            return cmd_ablate(abl_dataset, abl_det.resolve(config_section(config, "detector")),
                              abl_flags.resolve(config_section(config, "tracker")),
                              abl_metrics.resolve(config_section(config, "metrics")), abl_json,
                              abl_out, abl_jobs.jobs, out);
        }
        diagnostic(err, "usage", "no command given");
        return 1;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return 0;
    } catch (const CLI::ParseError& e) {
        diagnostic(err, "usage", e.what());
        return 1;
    } catch (const UsageError& e) {
        diagnostic(err, "usage", e.what());
        return 1;
    } catch (const DataError& e) {
        diagnostic(err, "data", e.what());
        return 2;
    } catch (const std::exception& e) {
        diagnostic(err, "internal", e.what());
        return 2;
    }
}

}  // namespace motkit::cli
