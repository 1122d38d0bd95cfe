// Generates the synthetic sphere_head test asset (and variants) as a P3DM
// model file. The generator itself lives in the core library so tests can
// compare a reloaded file against the in-memory arrays.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "facefit/model.hpp"
#include "facefit/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"facefit-make-asset: write the synthetic sphere_head P3DM model"};
    std::string out = "sphere_head.p3dm";
    int subdivisions = 3, id_dim = 8, ex_dim = 4;
    std::uint32_t seed = 20240101;
    app.add_option("--out", out, "Output model path");
    app.add_option("--subdivisions", subdivisions, "Icosphere subdivision level");
    app.add_option("--id-dim", id_dim, "Identity basis size");
    app.add_option("--ex-dim", ex_dim, "Expression basis size");
    app.add_option("--seed", seed, "Basis field seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const facefit::MorphableModel model =
            facefit::sphere_head_model(subdivisions, id_dim, ex_dim, seed);
        facefit::save_model(out, model);
        std::printf("wrote %s (%d vertices, %d triangles, K_id=%d, K_ex=%d)\n", out.c_str(),
                    model.vertex_count(), model.triangle_count(), model.id_dim(), model.ex_dim());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
