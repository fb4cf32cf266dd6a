#pragma once

#include <string>
#include <vector>

#include "ssr/common.hpp"
#include "ssr/sample.hpp"

namespace ssr {

enum class Shape { rectangle, circle };

extern const char* kColorNames[8];
extern const float kColorRgb[8][3];

const char* shape_name(Shape s);

// One object in the scene graph. Membership of a pixel in the footprint is
// defined here and nowhere else; the renderer and all answer oracles must go
// through covers().
struct SceneObject {
    int color = 0;  // index into kColorNames
    Shape shape = Shape::rectangle;
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // pixel bbox, [x1,x2) x [y1,y2)
    double depth = 1.0;                  // meters

    bool covers(int row, int col) const;
    double center_row() const { return 0.5 * (y1 + y2); }
    double center_col() const { return 0.5 * (x1 + x2); }
    std::string name() const;  // "red circle"
    BBox bbox() const { return {x1, y1, x2, y2}; }
};

struct Scene {
    int canvas_h = 64, canvas_w = 64;
    double background_depth = 10.0;
    std::vector<SceneObject> objects;

    void validate() const;
};

// Deterministic in (n_objects, canvas, seed). Guarantees: unique
// (color, shape) pairs, pairwise depth gaps >= 0.25 m, pairwise center row and
// column separation >= 4 px, extents >= 4x4 px inside the canvas.
Scene generate_scene(int n_objects, int canvas_h, int canvas_w, uint64_t seed,
                     double background_depth = 10.0);

struct Rendered {
    int h = 0, w = 0;
    std::vector<float> image;  // h*w*3
    std::vector<float> depth;  // h*w
};

// painter's rule per pixel: the nearest covering object wins
Rendered render_scene(const Scene& scene);

}  // namespace ssr
