#include "motkit/formats.hpp"

#include <charconv>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace motkit::formats {

using nlohmann::json;

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& token, int line, const char* field) {
    double value = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
        throw MalformedLine(line, std::string(field) + " is not a number: '" + token + "'");
    return value;
}

int parse_int(const std::string& token, int line, const char* field) {
    int value = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
        throw MalformedLine(line, std::string(field) + " is not an integer: '" + token + "'");
    return value;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            tokens.push_back(line.substr(start));
            return tokens;
        }
        tokens.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Calls fn(line_number, line) for every non-empty line.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) fn(line_no, line);
        start = end + 1;
    }
}

}  // namespace

std::vector<KittiTrackRecord> parse_kitti(const std::string& text) {
    std::vector<KittiTrackRecord> records;
    for_each_line(text, [&](int line_no, const std::string& line) {
        const std::vector<std::string> t = split_ws(line);
        if (t.size() != 17 && t.size() != 18)
            throw MalformedLine(line_no, "expected 17 or 18 fields, got " +
                                             std::to_string(t.size()));
        KittiTrackRecord r;
        r.frame = parse_int(t[0], line_no, "frame");
        r.track_id = parse_int(t[1], line_no, "track_id");
        r.type = t[2];
        r.truncated = parse_double(t[3], line_no, "truncated");
        r.occluded = parse_int(t[4], line_no, "occluded");
        r.alpha = parse_double(t[5], line_no, "alpha");
        r.left = parse_double(t[6], line_no, "bbox left");
        r.top = parse_double(t[7], line_no, "bbox top");
        r.right = parse_double(t[8], line_no, "bbox right");
        r.bottom = parse_double(t[9], line_no, "bbox bottom");
        r.height = parse_double(t[10], line_no, "height");
        r.width = parse_double(t[11], line_no, "width");
        r.length = parse_double(t[12], line_no, "length");
        r.x = parse_double(t[13], line_no, "x");
        r.y = parse_double(t[14], line_no, "y");
        r.z = parse_double(t[15], line_no, "z");
        r.rotation_y = parse_double(t[16], line_no, "rotation_y");
        if (t.size() == 18) r.score = parse_double(t[17], line_no, "score");
        if (r.frame < 0) throw MalformedLine(line_no, "frame must be non-negative");
        if (r.right < r.left) throw MalformedLine(line_no, "bbox right is left of bbox left");
        if (r.bottom < r.top) throw MalformedLine(line_no, "bbox bottom is above bbox top");
        records.push_back(std::move(r));
    });
    return records;
}

std::string write_kitti(const std::vector<KittiTrackRecord>& records) {
    std::string out;
    for (const KittiTrackRecord& r : records) {
        out += std::to_string(r.frame);
        out += ' ';
        out += std::to_string(r.track_id);
        out += ' ';
        out += r.type;
        out += ' ';
        out += format_double(r.truncated);
        out += ' ';
        out += std::to_string(r.occluded);
        for (double v : {r.alpha, r.left, r.top, r.right, r.bottom, r.height, r.width, r.length,
                         r.x, r.y, r.z, r.rotation_y}) {
            out += ' ';
            out += format_double(v);
        }
        if (r.score) {
            out += ' ';
            out += format_double(*r.score);
        }
        out += '\n';
    }
    return out;
}

std::vector<MotRecord> parse_mot(const std::string& text) {
    std::vector<MotRecord> records;
    for_each_line(text, [&](int line_no, const std::string& line) {
        const std::vector<std::string> t = split_commas(line);
        if (t.size() != 9 && t.size() != 10)
            throw MalformedLine(line_no, "expected 9 or 10 fields, got " +
                                             std::to_string(t.size()));
        MotRecord r;
        r.frame = parse_int(t[0], line_no, "frame");
        r.id = parse_int(t[1], line_no, "id");
        r.bb_left = parse_double(t[2], line_no, "bb_left");
        r.bb_top = parse_double(t[3], line_no, "bb_top");
        r.bb_width = parse_double(t[4], line_no, "bb_width");
        r.bb_height = parse_double(t[5], line_no, "bb_height");
        r.conf = parse_double(t[6], line_no, "conf");
        r.x = parse_double(t[7], line_no, "x");
        r.y = parse_double(t[8], line_no, "y");
        if (t.size() == 10) r.z = parse_double(t[9], line_no, "z");
        if (r.frame < 1) throw MalformedLine(line_no, "frame numbers start at 1");
        if (r.bb_width < 0.0 || r.bb_height < 0.0)
            throw MalformedLine(line_no, "box size must be non-negative");
        records.push_back(r);
    });
    return records;
}

std::string write_mot(const std::vector<MotRecord>& records) {
    std::string out;
    for (const MotRecord& r : records) {
        out += std::to_string(r.frame);
        out += ',';
        out += std::to_string(r.id);
        for (double v : {r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf, r.x, r.y, r.z}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

namespace {

json point2_to(const geom::Point2& p) { return json::array({p.u, p.v}); }
json point3_to(const geom::Point3& p) { return json::array({p.x, p.y, p.z}); }

geom::Point2 point2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
geom::Point3 point3_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

const char* status_name(supervision::Status s) {
    switch (s) {
        case supervision::Status::Positive: return "positive";
        case supervision::Status::Ignore: return "ignore";
        case supervision::Status::Negative: return "negative";
    }
    return "negative";
}

supervision::Status status_from(const std::string& s, int line) {
    if (s == "positive") return supervision::Status::Positive;
    if (s == "ignore") return supervision::Status::Ignore;
    if (s == "negative") return supervision::Status::Negative;
    throw MalformedLine(line, "unknown label status: " + s);
}

const char* origin_name(supervision::Origin o) {
    return o == supervision::Origin::Visible ? "visible" : "occluded";
}

supervision::Origin origin_from(const std::string& s, int line) {
    if (s == "visible") return supervision::Origin::Visible;
    if (s == "occluded") return supervision::Origin::OccludedPseudoGT;
    throw MalformedLine(line, "unknown label origin: " + s);
}

const char* v_target_name(supervision::VisTarget v) {
    switch (v) {
        case supervision::VisTarget::Occluded: return "occluded";
        case supervision::VisTarget::Visible: return "visible";
        case supervision::VisTarget::Unsupervised: return "unsupervised";
    }
    return "unsupervised";
}

supervision::VisTarget v_target_from(const std::string& s, int line) {
    if (s == "occluded") return supervision::VisTarget::Occluded;
    if (s == "visible") return supervision::VisTarget::Visible;
    if (s == "unsupervised") return supervision::VisTarget::Unsupervised;
    throw MalformedLine(line, "unknown visibility target: " + s);
}

json pose_to(const geom::CameraPose& pose) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(pose.rotation[r][c]);
    return json{{"rotation", std::move(rot)}, {"translation", point3_to(pose.translation)}};
}

geom::CameraPose pose_from(const json& j) {
    geom::CameraPose pose;
    const json& rot = j.at("rotation");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose.rotation[r][c] = rot.at(r * 3 + c).get<double>();
    pose.translation = point3_from(j.at("translation"));
    return pose;
}

json parse_json_line(int line_no, const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedLine(line_no, "invalid JSON");
    return j;
}

}  // namespace

std::string write_sequence(const SequenceDocument& doc) {
    const sim::Sequence& seq = doc.sequence;
    if (doc.labels && doc.labels->frames.size() != seq.frames.size())
        throw DataError("write_sequence: label set does not cover the sequence");

    json header{{"schema", kSequenceSchema},
                {"name", seq.name},
                {"seed", seq.seed},
                {"fps", seq.fps},
                {"image_size", json::array({seq.image_size.width, seq.image_size.height})},
                {"num_frames", seq.frames.size()},
                {"has_labels", doc.labels.has_value()}};
    std::string out = header.dump();
    out += '\n';

    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const sim::Frame& frame = seq.frames[f];
        json objects = json::array();
        for (const sim::AnnotatedObject& obj : frame.objects) {
            objects.push_back(json{{"id", obj.id},
                                   {"category", to_string(obj.category)},
                                   {"center", point2_to(obj.p)},
                                   {"size", json::array({obj.s.width, obj.s.height})},
                                   {"vis", obj.vis},
                                   {"world", point3_to(obj.world_center)},
                                   {"depth", obj.depth},
                                   {"out_of_frame", obj.out_of_frame}});
        }
        json jf{{"frame", f},
                {"intrinsics", json::array({frame.intrinsics.fx, frame.intrinsics.fy,
                                            frame.intrinsics.cx, frame.intrinsics.cy})},
                {"pose", pose_to(frame.pose)},
                {"objects", std::move(objects)}};
        if (doc.labels) {
            json labels = json::array();
            for (const supervision::LabelEntry& e : doc.labels->frames[f]) {
                json je{{"id", e.id},
                        {"category", to_string(e.category)},
                        {"status", status_name(e.status)},
                        {"origin", origin_name(e.origin)},
                        {"v_target", v_target_name(e.v_target)},
                        {"center", point2_to(e.center)},
                        {"size", json::array({e.size.width, e.size.height})},
                        {"weight", e.loss_weight}};
                if (e.displacement) je["displacement"] = point2_to(*e.displacement);
                labels.push_back(std::move(je));
            }
            jf["labels"] = std::move(labels);
        }
        out += jf.dump();
        out += '\n';
    }
    return out;
}

SequenceDocument read_sequence(const std::string& text) {
    SequenceDocument doc;
    bool saw_header = false;
    bool has_labels = false;
    std::size_t num_frames = 0;

    for_each_line(text, [&](int line_no, const std::string& line) {
        try {
            json j = parse_json_line(line_no, line);
            if (!saw_header) {
                const std::string schema = j.value("schema", "");
                if (schema != kSequenceSchema) throw SchemaVersionMismatch(schema);
                sim::Sequence& seq = doc.sequence;
                seq.name = j.at("name").get<std::string>();
                seq.seed = j.at("seed").get<std::uint64_t>();
                seq.fps = j.at("fps").get<double>();
                seq.image_size = {j.at("image_size").at(0).get<int>(),
                                  j.at("image_size").at(1).get<int>()};
                num_frames = j.at("num_frames").get<std::size_t>();
                has_labels = j.value("has_labels", false);
                seq.frames.reserve(num_frames);
                if (has_labels) {
                    doc.labels.emplace();
                    doc.labels->frames.reserve(num_frames);
                }
                saw_header = true;
                return;
            }
            sim::Frame frame;
            const json& intr = j.at("intrinsics");
            frame.intrinsics = {intr.at(0).get<double>(), intr.at(1).get<double>(),
                                intr.at(2).get<double>(), intr.at(3).get<double>()};
            frame.pose = pose_from(j.at("pose"));
            for (const json& jo : j.at("objects")) {
                sim::AnnotatedObject obj;
                obj.id = jo.at("id").get<int>();
                obj.category = category_from_string(jo.at("category").get<std::string>());
                obj.p = point2_from(jo.at("center"));
                obj.s = {jo.at("size").at(0).get<double>(), jo.at("size").at(1).get<double>()};
                obj.vis = jo.at("vis").get<double>();
                obj.world_center = point3_from(jo.at("world"));
                obj.depth = jo.at("depth").get<double>();
                obj.out_of_frame = jo.at("out_of_frame").get<bool>();
                frame.objects.push_back(obj);
            }
            doc.sequence.frames.push_back(std::move(frame));
            if (has_labels) {
                std::vector<supervision::LabelEntry> entries;
                for (const json& je : j.at("labels")) {
                    supervision::LabelEntry e;
                    e.id = je.at("id").get<int>();
                    e.category = category_from_string(je.at("category").get<std::string>());
                    e.status = status_from(je.at("status").get<std::string>(), line_no);
                    e.origin = origin_from(je.at("origin").get<std::string>(), line_no);
                    e.v_target = v_target_from(je.at("v_target").get<std::string>(), line_no);
                    e.center = point2_from(je.at("center"));
                    e.size = {je.at("size").at(0).get<double>(), je.at("size").at(1).get<double>()};
                    e.loss_weight = je.at("weight").get<double>();
                    if (je.contains("displacement")) e.displacement = point2_from(je.at("displacement"));
                    entries.push_back(std::move(e));
                }
                doc.labels->frames.push_back(std::move(entries));
            }
        } catch (const json::exception& e) {
            throw MalformedLine(line_no, std::string("bad document structure: ") + e.what());
        }
    });

    if (!saw_header) throw DataError("sequence document is empty");
    if (doc.sequence.frames.size() != num_frames)
        throw DataError("sequence document truncated: expected " + std::to_string(num_frames) +
                        " frames, found " + std::to_string(doc.sequence.frames.size()));
    return doc;
}

}  // namespace motkit::formats
