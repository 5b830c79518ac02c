#ifndef RENDERER_HPP
#define RENDERER_HPP

#include "shape.hpp"

namespace geo {

struct Renderer {
    void draw(const Shape& s);
    int frames = 0;
};

}  // namespace geo

#endif
