#include "shapefind/thumbnail.h"

#include "shapefind/error.h"
#include "shapefind/image.h"

#include <algorithm>

namespace shapefind {

std::vector<std::uint8_t> render_thumbnail(const VoxelGrid& grid, int size) {
    if (size < 8) throw Error(ErrorKind::InvalidArgument, "thumbnail size too small");
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(size) * size, 255);
    const auto& d = grid.dims();
    if (grid.empty()) return encode_png_gray(size, size, pixels);

    const int margin = size / 16;
    const double cell = static_cast<double>(size - 2 * margin) / std::max<int>(d[0], d[1]);
    const double off_x = (size - cell * d[0]) / 2.0;
    const double off_y = (size - cell * d[1]) / 2.0;
    for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
            int top = -1;
            for (int z = d[2] - 1; z >= 0; --z)
                if (grid.occupied(x, y, z)) {
                    top = z;
                    break;
                }
            if (top < 0) continue;
            // nearer cells are darker
            auto shade = static_cast<std::uint8_t>(40 + 150.0 * (d[2] - 1 - top) / std::max(1, d[2] - 1));
            int px0 = static_cast<int>(off_x + x * cell), px1 = static_cast<int>(off_x + (x + 1) * cell);
            // image rows run top to bottom, grid y runs upwards
            int py0 = static_cast<int>(off_y + (d[1] - 1 - y) * cell), py1 = static_cast<int>(off_y + (d[1] - y) * cell);
            for (int py = std::max(py0, 0); py < std::min(py1, size); ++py)
                for (int px = std::max(px0, 0); px < std::min(px1, size); ++px)
                    pixels[static_cast<std::size_t>(py) * size + px] = shade;
        }
    return encode_png_gray(size, size, pixels);
}

} // namespace shapefind
