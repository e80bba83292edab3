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
        self.id = id(self)  # Unique identifier for memoization

def max_height(node):
    """
    Calculate the maximum height of a binary tree.

    Parameters:
    node : Node
        The root node of the binary tree.

    Returns:
    int
        The maximum height of the binary tree.
    
    Side Effects:
    - Uses a memo dictionary to store previously calculated heights.
    - May raise a ValueError if the input is not a Node object or None.
    """
    if not isinstance(node, Node) and node is not None:
        raise ValueError("Input must be a Node object or None")

    def height_helper(node, memo):
        """
        Helper function to calculate height using memoization.

        Parameters:
        node : Node
            The current node being processed.
        memo : dict
            Dictionary to store previously calculated heights.

        Returns:
        int
            The height of the current subtree.
        
        Side Effects:
        - Updates the memo dictionary with the height of the current subtree.
        """
        if node is None:
            return 0
        if node.id in memo:
            return memo[node.id]
        # Calculate the height of left and right subtrees
        left_height = height_helper(node.left, memo)
        right_height = height_helper(node.right, memo)
        # Store the calculated height in memo
        memo[node.id] = max(left_height, right_height) + 1
        return memo[node.id]

    # Limit the size of the memo dictionary to avoid excessive memory usage
    memo = {}
    return height_helper(node, memo)

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
