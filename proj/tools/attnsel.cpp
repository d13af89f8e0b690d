#include "attnsel/pipeline.hpp"

int main(int argc, char** argv) { return attnsel::pipeline::main(argc, argv); }
