#include "renderer.hpp"
#include "../include/shape.hpp"

namespace geo {

static void log_frame(int n) {
    (void)n;
}

void Renderer::draw(const Shape& s) {
    double a = s.area();
    log_frame(frames++);
    if (a > 0) {
        s.name();
    }
}

}  // namespace geo
