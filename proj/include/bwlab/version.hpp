#ifndef BWLAB_VERSION_HPP
#define BWLAB_VERSION_HPP

#define BWLAB_VERSION "0.1.0"

#endif
