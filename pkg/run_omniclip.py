#! /usr/bin/env python3
# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Development launcher: runtime type checks and `ic` when installed."""

import logging
import typing as ty

logging.basicConfig(
    format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    datefmt="%X",
)

try:
    import icecream

    icecream.install()
    icecream.ic.configureOutput(
        includeContext=True, outputFunction=logging.warning
    )
except ImportError:
    pass

try:
    from typeguard import install_import_hook

    install_import_hook("omniclip")
    ty.TYPE_CHECKING = True
except ImportError as err:
    logging.warning("no typeguard: %s", err)


from omniclip import main  # noqa: E402

main.main()
