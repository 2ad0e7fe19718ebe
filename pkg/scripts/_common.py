import argparse
import csv
import sys


def parser(description: str, slots: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--slots", type=int, default=slots)
    p.add_argument("--seed", type=int, default=0)
    return p


def writer(header):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    return w
