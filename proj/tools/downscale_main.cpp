#include <cstdio>

#include "downscale/common.hpp"

int main() {
    std::printf("downscale %s\n", downscale::kVersion);
    return 0;
}
