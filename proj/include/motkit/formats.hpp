#pragma once

#include <optional>
#include <string>
#include <vector>

#include "motkit/common.hpp"
#include "motkit/simworld.hpp"
#include "motkit/supervision.hpp"

namespace motkit::formats {

class MalformedLine : public DataError {
public:
    MalformedLine(int line, const std::string& reason)
        : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class SchemaVersionMismatch : public DataError {
public:
    explicit SchemaVersionMismatch(const std::string& found)
        : DataError("unsupported schema version: " + found) {}
};

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

// One row of a KITTI tracking label/result file. Whitespace separated,
// 17 fields, or 18 with the trailing detection score.
struct KittiTrackRecord {
    int frame = 0;
    int track_id = 0;
    std::string type = "Car";
    double truncated = 0.0;
    int occluded = 0;
    double alpha = 0.0;
    double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;
    double height = 0.0, width = 0.0, length = 0.0;  // 3D box, meters
    double x = 0.0, y = 0.0, z = 0.0;                // 3D location, meters
    double rotation_y = 0.0;
    std::optional<double> score;
};

std::vector<KittiTrackRecord> parse_kitti(const std::string& text);
std::string write_kitti(const std::vector<KittiTrackRecord>& records);

// One row of a MOTChallenge file: comma separated, frame numbers 1-based,
// with -1 filling the unused world coordinates.
struct MotRecord {
    int frame = 1;
    int id = 0;
    double bb_left = 0.0, bb_top = 0.0, bb_width = 0.0, bb_height = 0.0;
    double conf = 1.0;
    double x = -1.0, y = -1.0, z = -1.0;
};

std::vector<MotRecord> parse_mot(const std::string& text);
std::string write_mot(const std::vector<MotRecord>& records);

// Internal annotated-sequence carrier: a header line with the schema tag,
// then one JSON object per frame (camera, annotations, optional labels).
inline constexpr const char* kSequenceSchema = "motkit-sequence/1";

struct SequenceDocument {
    sim::Sequence sequence;
    std::optional<supervision::LabelSet> labels;
};

std::string write_sequence(const SequenceDocument& doc);
SequenceDocument read_sequence(const std::string& text);

}  // namespace motkit::formats
