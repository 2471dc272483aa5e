#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "motkit/simworld.hpp"

namespace motkit::sim {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

Point3 point3_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw DataError(std::string(what) + " must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json point3_to(const Point3& p) { return json::array({p.x, p.y, p.z}); }

CameraIntrinsics intrinsics_from(const json& j) {
    if (!j.is_array() || j.size() != 4)
        throw DataError("intrinsics must be an array [fx, fy, cx, cy]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json intrinsics_to(const CameraIntrinsics& k) { return json::array({k.fx, k.fy, k.cx, k.cy}); }

CameraPose pose_from(const json& j) {
    if (j.contains("rotation")) {
        const json& r = j.at("rotation");
        if (!r.is_array() || r.size() != 9)
            throw DataError("pose rotation must be an array of 9 numbers, row major");
        CameraPose pose;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) pose.rotation[i][k] = r[i * 3 + k].get<double>();
        pose.translation = point3_from(j.at("translation"), "pose translation");
        return pose;
    }
    const Point3 position = point3_from(j.at("position"), "pose position");
    const double yaw = j.value("yaw", 0.0);
    return geom::pose_from_position_yaw(position, yaw);
}

json pose_to(const CameraPose& pose) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(pose.rotation[i][k]);
    return json{{"rotation", r}, {"translation", point3_to(pose.translation)}};
}

std::vector<CameraFrame> camera_from(const json& j, int num_frames) {
    std::vector<CameraFrame> frames;
    if (j.contains("frames")) {
        for (const json& jf : j.at("frames")) {
            CameraFrame cf;
            cf.intrinsics = intrinsics_from(jf.at("intrinsics"));
            cf.pose = pose_from(jf.at("pose"));
            frames.push_back(cf);
        }
        return frames;
    }
    // Parametric motion: linear translation plus an optional sinusoidal yaw.
    const CameraIntrinsics intr = intrinsics_from(j.at("intrinsics"));
    const json& m = j.at("motion");
    const Point3 position = point3_from(m.at("position"), "motion position");
    const Point3 velocity =
        m.contains("velocity") ? point3_from(m.at("velocity"), "motion velocity") : Point3{0, 0, 0};
    const double yaw0 = m.value("yaw", 0.0);
    const double amplitude = m.value("yaw_amplitude", 0.0);
    const double period = m.value("yaw_period", 0.0);
    const double phase = m.value("yaw_phase", 0.0);
    frames.reserve(num_frames);
    for (int f = 0; f < num_frames; ++f) {
        double yaw = yaw0;
        if (period > 0.0) yaw += amplitude * std::sin(2.0 * kPi * f / period + phase);
        CameraFrame cf;
        cf.intrinsics = intr;
        cf.pose = geom::pose_from_position_yaw(position + velocity * static_cast<double>(f), yaw);
        frames.push_back(cf);
    }
    return frames;
}

ScenarioConfig scenario_from(const json& j) {
    ScenarioConfig cfg;
    cfg.name = j.value("name", std::string("scenario"));
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.num_frames = j.at("num_frames").get<int>();
    cfg.fps = j.value("fps", 20.0);
    const json& im = j.at("image_size");
    if (!im.is_array() || im.size() != 2) throw DataError("image_size must be [width, height]");
    cfg.image_size = {im[0].get<int>(), im[1].get<int>()};
    cfg.visibility_stride = j.value("visibility_stride", 0);
    cfg.camera = camera_from(j.at("camera"), cfg.num_frames);
    for (const json& ja : j.value("agents", json::array())) {
        AgentSpec agent;
        agent.id = ja.at("id").get<int>();
        agent.category = category_from_string(ja.value("category", std::string("Car")));
        agent.size3d = point3_from(ja.at("size"), "agent size");
        for (const json& jw : ja.at("waypoints")) {
            Waypoint w;
            w.frame = jw.at("frame").get<int>();
            w.position = point3_from(jw.at("position"), "waypoint position");
            agent.waypoints.push_back(w);
        }
        for (const json& js : ja.value("stops", json::array()))
            agent.stops.push_back({js.at("begin").get<int>(), js.at("end").get<int>()});
        cfg.agents.push_back(std::move(agent));
    }
    for (const json& jo : j.value("occluders", json::array())) {
        Occluder occ;
        occ.center = point3_from(jo.at("center"), "occluder center");
        occ.size3d = point3_from(jo.at("size"), "occluder size");
        occ.first_frame = jo.value("first_frame", 0);
        occ.last_frame = jo.value("last_frame", -1);
        cfg.occluders.push_back(occ);
    }
    cfg.validate();
    return cfg;
}

json scenario_to(const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["num_frames"] = cfg.num_frames;
    j["fps"] = cfg.fps;
    j["image_size"] = json::array({cfg.image_size.width, cfg.image_size.height});
    j["visibility_stride"] = cfg.visibility_stride;
    json frames = json::array();
    for (const CameraFrame& cf : cfg.camera)
        frames.push_back(json{{"intrinsics", intrinsics_to(cf.intrinsics)}, {"pose", pose_to(cf.pose)}});
    j["camera"] = json{{"frames", std::move(frames)}};
    json agents = json::array();
    for (const AgentSpec& agent : cfg.agents) {
        json ja;
        ja["id"] = agent.id;
        ja["category"] = to_string(agent.category);
        ja["size"] = point3_to(agent.size3d);
        json ws = json::array();
        for (const Waypoint& w : agent.waypoints)
            ws.push_back(json{{"frame", w.frame}, {"position", point3_to(w.position)}});
        ja["waypoints"] = std::move(ws);
        if (!agent.stops.empty()) {
            json ss = json::array();
            for (const StopInterval& s : agent.stops)
                ss.push_back(json{{"begin", s.begin}, {"end", s.end}});
            ja["stops"] = std::move(ss);
        }
        agents.push_back(std::move(ja));
    }
    j["agents"] = std::move(agents);
    json occs = json::array();
    for (const Occluder& occ : cfg.occluders) {
        json jo{{"center", point3_to(occ.center)}, {"size", point3_to(occ.size3d)}};
        if (occ.first_frame != 0) jo["first_frame"] = occ.first_frame;
        if (occ.last_frame != -1) jo["last_frame"] = occ.last_frame;
        occs.push_back(std::move(jo));
    }
    j["occluders"] = std::move(occs);
    return j;
}

BenchmarkParams benchmark_params_from(const json& j) {
    BenchmarkParams params;
    params.num_frames = j.value("num_frames", params.num_frames);
    if (j.contains("image_size")) {
        const json& im = j.at("image_size");
        if (!im.is_array() || im.size() != 2) throw DataError("image_size must be [width, height]");
        params.image_size = {im[0].get<int>(), im[1].get<int>()};
    }
    params.focal = j.value("focal", params.focal);
    params.min_agents = j.value("min_agents", params.min_agents);
    params.max_agents = j.value("max_agents", params.max_agents);
    params.occluded_agent_fraction = j.value("occluded_agent_fraction", params.occluded_agent_fraction);
    params.fast_pan_fraction = j.value("fast_pan_fraction", params.fast_pan_fraction);
    return params;
}

void expand_entry(const json& entry, std::vector<ScenarioConfig>& out, int depth);

void expand_document(const json& doc, std::vector<ScenarioConfig>& out, int depth) {
    if (depth > 8) throw DataError("manifest nesting is too deep");
    if (doc.is_array()) {
        for (const json& entry : doc) expand_entry(entry, out, depth);
        return;
    }
    if (doc.contains("scenarios")) {
        for (const json& entry : doc.at("scenarios")) expand_entry(entry, out, depth);
        return;
    }
    expand_entry(doc, out, depth);
}

void expand_entry(const json& entry, std::vector<ScenarioConfig>& out, int depth) {
    if (!entry.is_object()) throw DataError("manifest entries must be JSON objects");
    if (entry.contains("file")) {
        const std::string path = entry.at("file").get<std::string>();
        std::ifstream in(path);
        if (!in) throw DataError("cannot open referenced file: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        json doc;
        try {
            doc = json::parse(buf.str());
        } catch (const json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
        expand_document(doc, out, depth + 1);
        return;
    }
    if (entry.contains("generate")) {
        const json& g = entry.at("generate");
        const std::uint64_t seed = g.value("seed", std::uint64_t{0});
        const int count = g.at("count").get<int>();
        if (count < 0) throw DataError("generate count must be non-negative");
        const BenchmarkParams params = benchmark_params_from(g.value("params", json::object()));
        std::vector<ScenarioConfig> generated = make_benchmark(seed, count, params);
        out.insert(out.end(), generated.begin(), generated.end());
        return;
    }
    out.push_back(scenario_from(entry));
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("scenario parse error: ") + e.what());
    }
    try {
        return scenario_from(doc);
    } catch (const json::exception& e) {
        throw DataError(std::string("scenario schema error: ") + e.what());
    }
}

std::string scenario_to_json(const ScenarioConfig& config) { return scenario_to(config).dump(2); }

std::vector<ScenarioConfig> expand_manifest(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest parse error: ") + e.what());
    }
    std::vector<ScenarioConfig> out;
    try {
        expand_document(doc, out, 0);
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest schema error: ") + e.what());
    }
    return out;
}

}  // namespace motkit::sim
