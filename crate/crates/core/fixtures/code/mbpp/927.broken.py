class Node:
    """
    A class to represent a node in a binary tree.
    
    Attributes:
    data : any
        The value stored in the node.
    left : Node
        The left child node.
    right : Node
        The right child node.
    """
    def __init__(self, data):
        """
        Constructs all the necessary attributes for the node object.

        Parameters:
        data : any
            The value to be stored in the node.
        """
        self.data = data
        self.left = None
        self.right = None

def max_height(node)
    """
    Calculate the maximum height of a binary tree.

    Parameters:
    node : Node
        The root node of the binary tree.

    Returns:
    int
        The maximum height of the binary tree.
    """
    if not isinstance(node, Node) and node is not None:
        raise ValueError("Input must be a Node object or None")

    def height_helper(node, memo):
        if node is None:
            return 0
        if node in memo:
            return memo[node]
        left_height = height_helper(node.left, memo)
        right_height = height_helper(node.right, memo)
        memo[node] = max(left_height, right_height) + 1
        return memo[node]

    return height_helper(node, {})

# Unit tests
def test_max_height():
    # Test with a simple tree
    root = Node(1)
    root.left = Node(2)
    root.right = Node(3)
    root.left.left = Node(4)
    root.left.right = Node(5)
    assert max_height(root) == 3

    # Test with a single node
    single_node = Node(1)
    assert max_height(single_node) == 1

    # Test with None
    assert max_height(None) == 0

    # Test with invalid input
    try:
        max_height("invalid")
    except ValueError as e:
        assert str(e) == "Input must be a Node object or None"

test_max_height()
