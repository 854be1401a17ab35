#include <cstdlib>
#include <cstring>

#include "oetr/kernels.hpp"

namespace oetr::kernels {

namespace {
const Table* select() {
    const char* env = std::getenv("OETR_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_table();
    const Table* avx2 = avx2_table();
    if (env && std::strcmp(env, "avx2") == 0 && avx2) return avx2;
    return avx2 ? avx2 : &scalar_table();
}
}  // namespace

const Table& active() {
    static const Table* t = select();
    return *t;
}

std::string active_name() { return active().name; }

}  // namespace oetr::kernels
