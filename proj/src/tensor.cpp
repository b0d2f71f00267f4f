#include "ecnn/tensor.hpp"

#include <sstream>

namespace ecnn {

Shape::Shape(std::initializer_list<std::size_t> extents) : extents_(extents) {
    validate();
}

Shape::Shape(std::vector<std::size_t> extents) : extents_(std::move(extents)) {
    validate();
}

void Shape::validate() {
    if (extents_.empty()) {
        throw ShapeError("shape must have at least one extent");
    }
    std::size_t count = 1;
    for (const std::size_t e : extents_) {
        if (e == 0) {
            throw ShapeError("shape extents must be >= 1, got " + to_string());
        }
        if (count > std::numeric_limits<std::size_t>::max() / e) {
            throw ShapeError("element count overflow for shape " + to_string());
        }
        count *= e;
    }
    // Float payloads are addressed in bytes; keep count * 8 representable.
    if (count > std::numeric_limits<std::size_t>::max() / sizeof(double)) {
        throw ShapeError("element count overflow for shape " + to_string());
    }
    count_ = count;
}

std::size_t Shape::flat_index(std::span<const std::size_t> index) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < extents_.size(); ++a) {
        flat = flat * extents_[a] + index[a];
    }
    return flat;
}

std::vector<std::size_t> Shape::unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(extents_.size());
    for (std::size_t a = extents_.size(); a-- > 0;) {
        idx[a] = flat % extents_[a];
        flat /= extents_[a];
    }
    return idx;
}

std::string Shape::to_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t a = 0; a < extents_.size(); ++a) {
        if (a) os << ',';
        os << extents_[a];
    }
    os << ']';
    return os.str();
}

}  // namespace ecnn
