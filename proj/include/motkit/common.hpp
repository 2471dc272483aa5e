#pragma once

#include <stdexcept>
#include <string>

namespace motkit {

// Object categories annotated by the simulator and consumed by the
// supervision, tracking and evaluation stages.
enum class Category { Car = 0, Pedestrian = 1 };

constexpr int kNumCategories = 2;

inline const char* to_string(Category c) {
    switch (c) {
        case Category::Car: return "Car";
        case Category::Pedestrian: return "Pedestrian";
    }
    return "Car";
}

inline Category category_from_string(const std::string& s) {
    if (s == "Car") return Category::Car;
    if (s == "Pedestrian") return Category::Pedestrian;
    throw std::invalid_argument("unknown category: " + s);
}

// Raised when an input document or file cannot be interpreted.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct Size2 {
    double width = 0.0;
    double height = 0.0;
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

}  // namespace motkit
