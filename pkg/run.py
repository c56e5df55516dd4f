"""
CLI launcher
Usage: python run.py <command> [options]
"""
import sys

from app.config import settings
from app.main import main

if __name__ == "__main__":
    if len(sys.argv) == 1:
        print(
            f"""
        ╔══════════════════════════════════════════════╗
        ║   CAMP Graph Engine                          ║
        ║   Centrality-aware asynchronous MP           ║
        ╚══════════════════════════════════════════════╝

        📂 Data: {settings.DATA_DIR}
        📊 Results: {settings.RESULTS_DIR}

        Commands:
        • train --config <file> [--override key=value]
        • sweep --config <file> --p 0.25,0.5 --layers 4,10
        • diagnose --dataset <dir> --metric dirichlet --out <csv>
        • centrality --dataset <dir> --measure degree
        • schedule-dump --dataset <dir> --measure degree --num-layers 4
        • stats --dataset <dir>
        """
        )
        sys.exit(0)

    sys.exit(main())
