#include "ogl/cli.hpp"

int main(int argc, char** argv) { return ogl::cli::dispatch(argc, argv); }
