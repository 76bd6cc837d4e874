import json, os, sys, argparse, fnmatch
import numpy as np
from colorama import Fore, Style

# Option parser
parser = argparse.ArgumentParser(description="lpmink regression test")
parser.add_argument("--kernel", type=str, choices=["python", "numba"], default="python")
parser.add_argument("--mpiexec", type=int, default=0)
parser.add_argument("--srun", type=int, default=0)
parser.add_argument("--name", type=str, default="ALL")
parser.add_argument("--skip", type=str, default="NONE")
args, unargs = parser.parse_known_args()

# Parse
kernel = args.kernel
mpiexec = args.mpiexec
srun = args.srun
name = args.name
skip = args.skip

# Get test names
if name == "ALL":
    names = []
    for item in os.listdir():
        if os.path.isdir(item):
            names.append(item)
else:
    names = [item for item in os.listdir() if fnmatch.fnmatch(item, name)]
names.sort()

# Remove skipped if specified
if skip != "NONE":
    skips = [item for item in os.listdir() if fnmatch.fnmatch(item, skip)]
    for name in skips:
        names.remove(name)


def compare(output, answer, path, rtol, atol, messages):
    """Check every entry of the answer key against the output summary."""
    for key, b in answer.items():
        name = path + "/" + key if path else key
        if key not in output:
            messages.append("Missing %s" % name)
            continue
        a = output[key]
        if isinstance(b, dict):
            compare(a, b, name, rtol, atol, messages)
        elif isinstance(b, (bool, str)) or b is None:
            if a != b:
                messages.append("Differences in %s: %s != %s" % (name, a, b))
        elif a is None or not np.isclose(a, b, rtol=rtol, atol=atol).all():
            messages.append("Differences in %s: %s != %s" % (name, a, b))


# Data for each test
printouts = []
runtimes = []
error_msgs = []
crashes = []
all_pass = True

# Run all tests
for i, name in enumerate(names):
    # Skip cache if any
    if name == "__pycache__":
        continue

    print("\n[%i/%i] " % (i + 1, len(names)) + name)
    error_msgs.append([])
    crashes.append(False)
    runtimes.append(-1)

    # Change directory
    os.chdir(name)

    # Check test setup
    if not os.path.exists("input.json"):
        print(Fore.RED + "  input.json is missing\n" + Style.RESET_ALL)
        sys.exit()
    if not os.path.exists("answer.json"):
        print(Fore.RED + "  answer.json is missing\n" + Style.RESET_ALL)
        sys.exit()

    # Delete output if exists
    for suffix in [".json", ".h5"]:
        if os.path.exists("output" + suffix):
            os.remove("output" + suffix)

    # Run the test problem (redirect the stdout)
    command = (
        "python -m lpmink --config input.json --out . --output output --kernel=%s --no-progress_bar > tmp 2>&1"
        % kernel
    )
    if mpiexec > 1:
        os.system("mpiexec -n %i %s" % (mpiexec, command))
    elif srun > 1:
        os.system("srun -n %i %s" % (srun, command))
    else:
        os.system(command)
    with open("tmp") as f:
        printouts.append(f.read())
    os.remove("tmp")

    # Check if crashed
    if not os.path.exists("output.json"):
        print(Fore.RED + "  Failed: Run crashed" + Style.RESET_ALL)
        all_pass = False
        crashes[-1] = True
        os.chdir("..")
        continue

    # Get the output and the answer key
    with open("output.json") as f:
        output = json.load(f)
    with open("answer.json") as f:
        answer = json.load(f)

    if os.path.exists("output.h5"):
        import h5py

        with h5py.File("output.h5", "r") as f:
            runtimes[-1] = f["runtime/total"][()][0]
        print("  (%.2f seconds)" % runtimes[-1])

    # Tolerances ride along in the answer key
    rtol = answer.pop("rtol", 1e-5)
    atol = answer.pop("atol", 1e-8)
    for key in answer:
        messages = []
        compare(output, {key: answer[key]}, "", rtol, atol, messages)
        if not messages:
            print(Fore.GREEN + "  {}: Passed".format(key) + Style.RESET_ALL)
        else:
            all_pass = False
            error_msgs[-1] += messages
            print(Fore.RED + "  {}: Failed".format(key) + Style.RESET_ALL)

    # Move back up
    os.chdir("..")

# Report test results
N_fails = 0
for i in range(len(names)):
    if crashes[i] or len(error_msgs[i]) > 0:
        N_fails += 1

print(
    "\nTests passed: "
    + Fore.GREEN
    + "%i/%i" % (len(names) - N_fails, len(names))
    + Style.RESET_ALL
)
print("Tests failed: " + Fore.RED + "%i/%i" % (N_fails, len(names)) + Style.RESET_ALL)
print("  (%.2f seconds)\n" % np.sum(np.array([t for t in runtimes if t > 0])))
for i in range(len(names)):
    if crashes[i]:
        print("\n" + "=" * 80)
        print("\n## {} crashed:".format(names[i]))
        print(printouts[i])
    if len(error_msgs[i]) > 0:
        print("\n" + "=" * 80)
        print("\n## {} failed:".format(names[i]))
        print(printouts[i])
        print("\n===\n")
        for msg in error_msgs[i]:
            print("\n# " + msg + "\n")

assert all_pass
