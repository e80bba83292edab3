import os
def f(a, b):
    password = "hunter2"
    os.system("ls " + a)
    return eval(b)
