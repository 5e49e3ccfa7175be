"""
Full reproduction pipeline
Validates the data file, writes the summary table and heatmap, then runs every benchmark suite.
Data path comes from --data or PDBENCH_DATA (.env).
"""

import subprocess
import sys


def run_command(command, description):
    """Run a command and handle errors."""
    print("\n" + "=" * 70)
    print(f"Running: {description}")
    print("=" * 70)

    try:
        subprocess.run(
            command,
            check=True,
            capture_output=False,  # Show output in real-time
            text=True
        )
        print(f"\n✓ {description} completed successfully")
        return True
    except subprocess.CalledProcessError as e:
        print(f"\n❌ {description} failed with error code {e.returncode}")
        return False
    except Exception as e:
        print(f"\n❌ {description} failed: {e}")
        return False


def pipeline_steps(extra_args):
    cli = [sys.executable, "-m", "pdbench.cli"]
    return [
        (cli + ["validate"] + extra_args, "Data validation"),
        (cli + ["summarize"] + extra_args, "Summary statistics"),
        (cli + ["heatmap"] + extra_args, "Correlation heatmap"),
        (cli + ["bench", "--suite", "all"] + extra_args, "Benchmark suites"),
    ]


def main(argv=None):
    """Run the automated pipeline."""
    extra_args = list(sys.argv[1:] if argv is None else argv)

    print("=" * 70)
    print("Parkinson's Voice Benchmark Pipeline")
    print("=" * 70)
    print("\nThis pipeline will:")
    print("1. Validate the data file")
    print("2. Print summary statistics and strongest correlations")
    print("3. Render the correlation heatmap")
    print("4. Run every benchmark suite and write the result tables\n")

    for command, description in pipeline_steps(extra_args):
        if not run_command(command, description):
            print(f"\n⚠ {description} failed. Later steps will not run.")
            print("Please check the error above and try again.")
            return 1

    # Final summary
    print("\n" + "=" * 70)
    print("Pipeline Complete!")
    print("=" * 70)
    print("\n✓ All steps completed successfully")
    print("\nResult tables, heatmap.svg and provenance.json are in the output directory")
    print("  (--out, or PDBENCH_OUT; default: results/)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
