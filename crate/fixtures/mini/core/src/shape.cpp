#include "shape.hpp"
#include <cmath>

namespace geo {

std::string Shape::name() const {
    return "shape";
}

Circle::Circle(double r) : radius_(r) {}

double Circle::area() const {
    return M_PI * std::pow(radius_, 2);
}

}  // namespace geo
